//! The gauge group O(ν) ⋉ ℝ^{ν(0)*}: per-mass orthogonal species rotations
//! plus affine shifts of the massless fields.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ccr::{AlgebraElement, AlgebraMap, PhaseSpace};
use crate::classical::{Profile, Solution, C64};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpacetime, MassSpectrum};
use crate::linalg::{max_abs, orthonormalize, rank};
use crate::sampling;

pub const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeElement {
    spectrum: MassSpectrum,
    blocks: Vec<DMatrix<f64>>,
    ell: Vec<f64>,
}

impl GaugeElement {
    pub fn new(spectrum: &MassSpectrum, blocks: Vec<DMatrix<f64>>, ell: Vec<f64>) -> Result<Self> {
        let entries = spectrum.entries();
        if blocks.len() != entries.len() || ell.len() != spectrum.massless_count() {
            return Err(Error::SpectrumMismatch);
        }
        for (b, &(mass, k)) in blocks.iter().zip(entries) {
            if b.shape() != (k, k) {
                return Err(Error::SpectrumMismatch);
            }
            let residual = max_abs(&(b.transpose() * b - DMatrix::identity(k, k)));
            if !(residual < ORTHOGONALITY_TOL) {
                return Err(Error::NotOrthogonal { mass, residual });
            }
        }
        Ok(Self { spectrum: spectrum.clone(), blocks, ell })
    }

    pub fn identity(spectrum: &MassSpectrum) -> Self {
        Self {
            spectrum: spectrum.clone(),
            blocks: spectrum.entries().iter().map(|&(_, k)| DMatrix::identity(k, k)).collect(),
            ell: vec![0.0; spectrum.massless_count()],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, spectrum: &MassSpectrum, with_shift: bool) -> Self {
        let blocks = spectrum.entries().iter().map(|&(_, k)| sampling::orthogonal(rng, k)).collect();
        let ell = (0..spectrum.massless_count())
            .map(|_| if with_shift { sampling::normal(rng) } else { 0.0 })
            .collect();
        Self { spectrum: spectrum.clone(), blocks, ell }
    }

    /// Pure shift (I, ℓ).
    pub fn shift(spectrum: &MassSpectrum, ell: Vec<f64>) -> Result<Self> {
        let id = Self::identity(spectrum);
        Self::new(spectrum, id.blocks, ell)
    }

    pub fn spectrum(&self) -> &MassSpectrum {
        &self.spectrum
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    /// Block R_0 of the massless species (empty if none).
    fn massless_block(&self) -> DMatrix<f64> {
        match self.spectrum.entries().iter().position(|&(m, _)| m == 0.0) {
            Some(i) => self.blocks[i].clone(),
            None => DMatrix::zeros(0, 0),
        }
    }

    /// (R, ℓ)∘(R′, ℓ′) = (RR′, ℓR′_0 + ℓ′).
    pub fn compose(&self, other: &GaugeElement) -> Result<GaugeElement> {
        if self.spectrum != other.spectrum {
            return Err(Error::SpectrumMismatch);
        }
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect();
        let r0 = other.massless_block();
        let k = self.ell.len();
        let ell = (0..k).map(|j| (0..k).map(|i| self.ell[i] * r0[(i, j)]).sum::<f64>() + other.ell[j]).collect();
        Ok(GaugeElement { spectrum: self.spectrum.clone(), blocks, ell })
    }

    /// (R⁻¹, −ℓR_0⁻¹).
    pub fn inverse(&self) -> GaugeElement {
        let blocks: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| b.transpose()).collect();
        let r0inv = self.massless_block().transpose();
        let k = self.ell.len();
        let ell = (0..k).map(|j| -(0..k).map(|i| self.ell[i] * r0inv[(i, j)]).sum::<f64>()).collect();
        GaugeElement { spectrum: self.spectrum.clone(), blocks, ell }
    }

    pub fn distance(&self, other: &GaugeElement) -> f64 {
        let b = self.blocks.iter().zip(&other.blocks).map(|(a, b)| max_abs(&(a - b))).fold(0.0, f64::max);
        let l = self.ell.iter().zip(&other.ell).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        b.max(l)
    }

    /// Species-space matrix of R (block diagonal over masses).
    pub fn species_matrix(&self) -> DMatrix<f64> {
        crate::linalg::block_diag(&self.blocks)
    }

    fn check(&self, st: &LatticeSpacetime) -> Result<()> {
        if st.spectrum() != &self.spectrum {
            Err(Error::SpectrumMismatch)
        } else {
            Ok(())
        }
    }

    /// S(R) as a matrix on Cauchy data.
    pub fn classical_matrix(&self, st: &LatticeSpacetime) -> Result<DMatrix<f64>> {
        self.check(st)?;
        let r = self.species_matrix();
        let (n, ns) = (st.n_sites(), st.species_count());
        let mut out = DMatrix::zeros(st.phase_dim(), st.phase_dim());
        for a in 0..ns {
            for b in 0..ns {
                if r[(a, b)] == 0.0 {
                    continue;
                }
                for c in 0..2 {
                    for x in 0..n {
                        out[(st.index(a, c, x), st.index(b, c, x))] = r[(a, b)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Quantum action ζ(R, ℓ) as an algebra map.
    pub fn quantum_map(&self, st: &LatticeSpacetime) -> Result<AlgebraMap> {
        let linear = self.classical_matrix(st)?;
        let shift = (0..st.phase_dim()).map(|i| ell_on_basis(st, &self.ell, i)).collect::<Result<Vec<_>>>()?;
        AlgebraMap::affine(PhaseSpace::of(st), linear, shift)
    }

    pub fn to_json(&self) -> GaugeJson {
        GaugeJson {
            blocks: self
                .spectrum
                .entries()
                .iter()
                .zip(&self.blocks)
                .map(|(&(mass, _), b)| BlockJson { mass, r: b.row_iter().map(|row| row.iter().copied().collect()).collect() })
                .collect(),
            ell: self.ell.clone(),
        }
    }

    pub fn from_json(spectrum: &MassSpectrum, json: &GaugeJson) -> Result<Self> {
        let mut blocks = Vec::new();
        for (b, &(mass, k)) in json.blocks.iter().zip(spectrum.entries()) {
            if b.mass != mass || b.r.len() != k || b.r.iter().any(|row| row.len() != k) {
                return Err(Error::SpectrumMismatch);
            }
            blocks.push(DMatrix::from_fn(k, k, |i, j| b.r[i][j]));
        }
        Self::new(spectrum, blocks, json.ell.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeJson {
    pub blocks: Vec<BlockJson>,
    pub ell: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockJson {
    pub mass: f64,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

/// Indices of the massless species, in order.
pub fn massless_species(st: &LatticeSpacetime) -> Vec<usize> {
    st.spectrum().species_masses().iter().enumerate().filter(|(_, &m)| m == 0.0).map(|(s, _)| s).collect()
}

/// ⟨ℓ, e_i⟩ for a canonical basis vector.
fn ell_on_basis(st: &LatticeSpacetime, ell: &[f64], i: usize) -> Result<f64> {
    let (s, c, _) = st.unindex(i);
    let massless = massless_species(st);
    if ell.len() != massless.len() {
        return Err(Error::SpectrumMismatch);
    }
    Ok(match massless.iter().position(|&k| k == s) {
        Some(j) if c == 1 => -ell[j],
        _ => 0.0,
    })
}

/// S(R)φ; the shift part of `g` is ignored.
pub fn classical_action(g: &GaugeElement, phi: &Solution) -> Result<Solution> {
    Ok(phi.apply(&g.classical_matrix(phi.spacetime())?))
}

/// ⟨ℓ, φ⟩ = σ(ℓ·φ_0, 1_M) = −Σ_x Σ_j ℓ_j p_j(x) over the massless species j.
pub fn ell_functional(ell: &[f64], phi: &Solution) -> Result<C64> {
    let st = phi.spacetime();
    let massless = massless_species(st);
    if massless.is_empty() {
        return Err(Error::NoMasslessSpecies);
    }
    if ell.len() != massless.len() {
        return Err(Error::SpectrumMismatch);
    }
    let mut acc = C64::new(0.0, 0.0);
    for (j, &s) in massless.iter().enumerate() {
        acc -= phi.p(s).iter().sum::<C64>() * ell[j];
    }
    Ok(acc)
}

/// ζ(g)a.
pub fn quantum_action(g: &GaugeElement, st: &LatticeSpacetime, a: &AlgebraElement) -> Result<AlgebraElement> {
    g.quantum_map(st)?.apply(a)
}

/// A family of degree ≤ 1 fields indexed by a single-species profile.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldFamily {
    /// The constant unit field.
    Unit,
    /// f ↦ Φ(f ⊗ e_s).
    Component(usize),
    /// f ↦ Σ_s c_s Φ(f ⊗ e_s).
    Combination(Vec<f64>),
    /// f ↦ Φ(f ⊗ e_s)²; not linear, rejected.
    Square(usize),
}

impl FieldFamily {
    pub fn evaluate(&self, st: &Arc<LatticeSpacetime>, f: &Profile) -> Result<AlgebraElement> {
        let space = PhaseSpace::of(st);
        let comp = |s: usize| Solution::embed(st, f, s).map(|sol| AlgebraElement::field(&sol));
        match self {
            FieldFamily::Unit => Ok(AlgebraElement::unit(space)),
            FieldFamily::Component(s) => comp(*s),
            FieldFamily::Combination(c) => {
                let mut acc = AlgebraElement::zero(space);
                for (s, &w) in c.iter().enumerate() {
                    if w != 0.0 {
                        acc = acc.add(&comp(s)?.scale(C64::new(w, 0.0)))?;
                    }
                }
                Ok(acc)
            }
            FieldFamily::Square(s) => {
                let e = comp(*s)?;
                e.product(&e)
            }
        }
    }

    fn name(&self) -> String {
        match self {
            FieldFamily::Unit => "unit".into(),
            FieldFamily::Component(s) => format!("component {s}"),
            FieldFamily::Combination(_) => "combination".into(),
            FieldFamily::Square(s) => format!("square of component {s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepresentationLabel {
    Defining,
    Conjugate,
    Singlet,
    TensorSubrep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplet {
    /// Indices into the input family list.
    pub members: Vec<usize>,
    pub mass: Option<f64>,
    pub dimension: usize,
    pub label: RepresentationLabel,
    /// Label of the star-image of the multiplet.
    pub star_label: RepresentationLabel,
}

fn coefficient_vector(a: &AlgebraElement) -> DVector<f64> {
    // real and imaginary parts of the degree ≤ 1 coefficients; slot 0 is 𝟙
    let d = a.space().dim;
    let mut v = DVector::zeros(2 * (d + 1));
    for (k, c) in a.terms() {
        let slot = if k.is_empty() { 0 } else { k[0] as usize + 1 };
        v[2 * slot] = c.re;
        v[2 * slot + 1] = c.im;
    }
    v
}

/// Groups field families into multiplets by the span of their G-orbits under
/// `samples` random group elements.
pub fn multiplet_decompose<R: Rng + ?Sized>(
    rng: &mut R,
    st: &Arc<LatticeSpacetime>,
    families: &[FieldFamily],
    samples: usize,
) -> Result<Vec<Multiplet>> {
    let n = st.n_sites();
    let random_profile = |rng: &mut R| {
        let q: Vec<f64> = (0..n).map(|_| sampling::normal(rng)).collect();
        let mut p: Vec<f64> = (0..n).map(|_| sampling::normal(rng)).collect();
        // charge zero, so massless orbits do not pick up the unit
        let mean = p.iter().sum::<f64>() / n as f64;
        p.iter_mut().for_each(|v| *v -= mean);
        Profile::real(&q, &p)
    };
    // linearity
    for fam in families {
        if *fam == FieldFamily::Unit {
            continue;
        }
        let (f, g) = (random_profile(rng), random_profile(rng));
        let lam = 0.7;
        let fg = Profile {
            q: f.q.iter().zip(&g.q).map(|(a, b)| a + b * lam).collect(),
            p: f.p.iter().zip(&g.p).map(|(a, b)| a + b * lam).collect(),
        };
        let lhs = fam.evaluate(st, &fg)?;
        let rhs = fam.evaluate(st, &f)?.add(&fam.evaluate(st, &g)?.scale(C64::new(lam, 0.0)))?;
        if lhs.distance(&rhs)? > 1e-10 * (1.0 + rhs.max_abs()) || lhs.degree() > 1 {
            return Err(Error::NotLinearFamily(fam.name()));
        }
    }
    let psi = random_profile(rng);
    let group: Vec<GaugeElement> = (0..samples).map(|_| GaugeElement::random(rng, st.spectrum(), true)).collect();
    let maps = group.iter().map(|g| g.quantum_map(st)).collect::<Result<Vec<_>>>()?;
    let mut spans = Vec::with_capacity(families.len());
    for fam in families {
        let base = fam.evaluate(st, &psi)?;
        let mut cols = vec![coefficient_vector(&base)];
        for m in &maps {
            cols.push(coefficient_vector(&m.apply(&base)?));
        }
        spans.push(orthonormalize(&DMatrix::from_columns(&cols), 1e-9));
    }
    // union-find on overlapping spans
    let mut parent: Vec<usize> = (0..families.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for a in 0..families.len() {
        for b in a + 1..families.len() {
            let joint = DMatrix::from_columns(
                &spans[a].column_iter().chain(spans[b].column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
            );
            if joint.ncols() > 0 && rank(&joint, 1e-9) < spans[a].ncols() + spans[b].ncols() {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let masses = st.spectrum().species_masses();
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..families.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out = Vec::new();
    for members in groups.into_values() {
        let cols: Vec<DVector<f64>> = members.iter().flat_map(|&i| spans[i].column_iter().map(|c| c.into_owned())).collect();
        let dimension = rank(&DMatrix::from_columns(&cols), 1e-9);
        let species: Vec<usize> = members
            .iter()
            .flat_map(|&i| match &families[i] {
                FieldFamily::Component(s) | FieldFamily::Square(s) => vec![*s],
                FieldFamily::Combination(c) => (0..c.len()).filter(|&s| c[s] != 0.0).collect(),
                FieldFamily::Unit => vec![],
            })
            .collect();
        let mass = species.first().map(|&s| masses[s]);
        let block_size = mass.and_then(|m| st.spectrum().multiplicity(m));
        let label = if dimension == 1 && members.iter().all(|&i| families[i] == FieldFamily::Unit) {
            RepresentationLabel::Singlet
        } else if Some(dimension) == block_size {
            RepresentationLabel::Defining
        } else if dimension == 1 {
            RepresentationLabel::Singlet
        } else {
            RepresentationLabel::TensorSubrep
        };
        let star_label = match label {
            RepresentationLabel::Defining => RepresentationLabel::Conjugate,
            other => other,
        };
        out.push(Multiplet { members, mass, dimension, label, star_label });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rot(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn semidirect_law_example() {
        let spec: MassSpectrum = "0:2".parse().unwrap();
        let half = std::f64::consts::FRAC_PI_2;
        let g = GaugeElement::new(&spec, vec![rot(half)], vec![1.0, 0.0]).unwrap();
        let h = GaugeElement::new(&spec, vec![rot(half)], vec![0.0, 1.0]).unwrap();
        let gh = g.compose(&h).unwrap();
        assert!(max_abs(&(&gh.blocks()[0] - rot(2.0 * half))) < 1e-15);
        assert!(gh.ell().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn inverse_and_identity() {
        let spec: MassSpectrum = "0:2,1:3".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GaugeElement::random(&mut rng, &spec, true);
        let id = GaugeElement::identity(&spec);
        assert!(g.compose(&id).unwrap().distance(&g) < 1e-15);
        assert!(g.compose(&g.inverse()).unwrap().distance(&id) < 1e-14);
        assert!(g.inverse().compose(&g).unwrap().distance(&id) < 1e-14);
    }

    #[test]
    fn validation() {
        let spec: MassSpectrum = "0:1,1:2".parse().unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            GaugeElement::new(&spec, vec![DMatrix::identity(1, 1), bad], vec![0.0]),
            Err(Error::NotOrthogonal { mass, .. }) if mass == 1.0
        ));
        assert_eq!(GaugeElement::new(&spec, vec![DMatrix::identity(1, 1)], vec![0.0]), Err(Error::SpectrumMismatch));
        let other: MassSpectrum = "1:3".parse().unwrap();
        assert_eq!(GaugeElement::identity(&spec).compose(&GaugeElement::identity(&other)), Err(Error::SpectrumMismatch));
    }

    #[test]
    fn ell_sign_convention() {
        let st = Arc::new(LatticeSpacetime::new(6, 4, 0.5, "0:1".parse().unwrap()).unwrap());
        let kick = Solution::basis(&st, st.index(0, 1, 2));
        let one = Solution::unit_constant(&st, 0).unwrap();
        let via_sigma = crate::classical::symplectic_form(&kick, &one).unwrap();
        assert_eq!(ell_functional(&[1.0], &kick).unwrap(), via_sigma);
        assert_eq!(via_sigma, C64::new(-1.0, 0.0));
        let massive = Arc::new(LatticeSpacetime::new(6, 4, 0.5, "1:1".parse().unwrap()).unwrap());
        assert_eq!(ell_functional(&[], &Solution::zeros(&massive)), Err(Error::NoMasslessSpecies));
    }

    #[test]
    fn gauge_json_schema() {
        let spec: MassSpectrum = "0:1,2:2".parse().unwrap();
        let g = GaugeElement::new(&spec, vec![DMatrix::identity(1, 1), rot(0.0)], vec![0.5]).unwrap();
        let json = serde_json::to_string(&g.to_json()).unwrap();
        assert_eq!(json, r#"{"blocks":[{"mass":0.0,"R":[[1.0]]},{"mass":2.0,"R":[[1.0,-0.0],[0.0,1.0]]}],"ell":[0.5]}"#);
        let back: GaugeJson = serde_json::from_str(&json).unwrap();
        assert_eq!(GaugeElement::from_json(&spec, &back).unwrap(), g);
    }

    #[test]
    fn multiplets_by_mass_block() {
        let st = Arc::new(LatticeSpacetime::new(6, 4, 0.5, "1:2,2:3".parse().unwrap()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fams: Vec<FieldFamily> = (0..5).map(FieldFamily::Component).chain([FieldFamily::Unit]).collect();
        let ms = multiplet_decompose(&mut rng, &st, &fams, 50).unwrap();
        let mut dims: Vec<(usize, RepresentationLabel)> = ms.iter().map(|m| (m.dimension, m.label)).collect();
        dims.sort_by_key(|d| d.0);
        assert_eq!(
            dims,
            vec![(1, RepresentationLabel::Singlet), (2, RepresentationLabel::Defining), (3, RepresentationLabel::Defining)]
        );
        let bad = multiplet_decompose(&mut rng, &st, &[FieldFamily::Square(0)], 5);
        assert!(matches!(bad, Err(Error::NotLinearFamily(_))));
    }
}
