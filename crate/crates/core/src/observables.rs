//! Gauge-invariant observables: charge-zero data, bilinear generators,
//! invariance checks and the central elements of a compact Cauchy surface.
//!
//! Charges are taken against the constant unit solution 1 (q ≡ 1, p ≡ 0) of
//! each massless species, so σ(φ, 1) = −Σ_x p(x). The complement θ is the
//! uniform momentum kick p ≡ −1/N with σ(θ, 1) = 1.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ccr::{AlgebraElement, PhaseSpace, TermJson};
use crate::classical::{symplectic_form, Profile, Solution, C64};
use crate::error::{Error, Result};
use crate::gauge::{massless_species, quantum_action, GaugeElement};
use crate::lattice::{LatticeSpacetime, Region};

/// Absolute tolerance for "is invariant" decisions, scaled by the size of
/// the element.
pub const INVARIANCE_TOL: f64 = 1e-10;

/// Charge of a single-species profile: σ(f ⊗ e, 1 ⊗ e) = −Σ p.
pub fn profile_charge(f: &Profile) -> C64 {
    -f.p.iter().sum::<C64>()
}

/// Data with vanishing charge in every massless species, plus one
/// complement θ per massless species.
#[derive(Debug, Clone)]
pub struct ChargeZeroSubspace {
    spacetime: Arc<LatticeSpacetime>,
    basis: Vec<Solution>,
    theta: Vec<Solution>,
    units: Vec<Solution>,
}

impl ChargeZeroSubspace {
    pub fn new(st: &Arc<LatticeSpacetime>) -> Result<Self> {
        let n = st.n_sites();
        let massless = massless_species(st);
        let mut basis = Vec::new();
        for i in 0..st.phase_dim() {
            let (s, c, x) = st.unindex(i);
            if c == 1 && massless.contains(&s) {
                // momentum differences span the charge-zero momenta
                if x + 1 < n {
                    let mut v = Solution::basis(st, i);
                    v = v.sub(&Solution::basis(st, st.index(s, 1, x + 1)))?;
                    basis.push(v);
                }
            } else {
                basis.push(Solution::basis(st, i));
            }
        }
        let mut theta = Vec::new();
        let mut units = Vec::new();
        for &s in &massless {
            theta.push(Solution::embed(st, &Profile::real(&vec![0.0; n], &vec![-1.0 / n as f64; n]), s)?);
            units.push(Solution::unit_constant(st, s)?);
        }
        Ok(Self { spacetime: st.clone(), basis, theta, units })
    }

    pub fn basis(&self) -> &[Solution] {
        &self.basis
    }

    pub fn theta(&self) -> &[Solution] {
        &self.theta
    }

    /// Constant unit solutions, one per massless species.
    pub fn units(&self) -> &[Solution] {
        &self.units
    }

    /// Codimension in the full data space.
    pub fn codimension(&self) -> usize {
        self.spacetime.phase_dim() - self.basis.len()
    }

    /// σ(φ, 1_j) for each massless species j.
    pub fn charges(&self, phi: &Solution) -> Result<Vec<C64>> {
        self.units.iter().map(|u| symplectic_form(phi, u)).collect()
    }

    pub fn contains(&self, phi: &Solution, tol: f64) -> Result<bool> {
        Ok(self.charges(phi)?.iter().all(|c| c.norm() < tol))
    }

    /// φ − Σ_j σ(φ, 1_j) θ_j.
    pub fn project(&self, phi: &Solution) -> Result<Solution> {
        let mut out = phi.clone();
        for (c, th) in self.charges(phi)?.into_iter().zip(&self.theta) {
            out = out.sub(&th.scale(c))?;
        }
        Ok(out)
    }
}

/// Species of mass `mass`, or an error if the mass is absent.
fn species_of_mass(st: &LatticeSpacetime, mass: f64) -> Result<std::ops::Range<usize>> {
    st.spectrum()
        .blocks()
        .into_iter()
        .find(|(m, _)| *m == mass)
        .map(|(_, r)| r)
        .ok_or(Error::MassNotInSpectrum(mass))
}

/// Σ_{i ∈ block(m)} Φ(f ⊗ e_i) Φ(g ⊗ e_i).
pub fn bilinear_generator(st: &Arc<LatticeSpacetime>, mass: f64, f: &Profile, g: &Profile) -> Result<AlgebraElement> {
    let range = species_of_mass(st, mass)?;
    if mass == 0.0 {
        for h in [f, g] {
            let q = profile_charge(h);
            if q.norm() > 1e-12 {
                return Err(Error::NotChargeZero(q.norm()));
            }
        }
    }
    let mut acc = AlgebraElement::zero(PhaseSpace::of(st));
    for s in range {
        let a = AlgebraElement::field(&Solution::embed(st, f, s)?);
        let b = AlgebraElement::field(&Solution::embed(st, g, s)?);
        acc = acc.add(&a.product(&b)?)?;
    }
    Ok(acc)
}

/// Φ(f ⊗ e_a) Φ(g ⊗ e_b) for two individual species; not invariant unless
/// the pairing is part of a full block sum.
pub fn species_bilinear(st: &Arc<LatticeSpacetime>, a: usize, f: &Profile, b: usize, g: &Profile) -> Result<AlgebraElement> {
    AlgebraElement::field(&Solution::embed(st, f, a)?).product(&AlgebraElement::field(&Solution::embed(st, g, b)?))
}

/// Bilinear generator with provenance metadata.
#[derive(Debug, Clone)]
pub struct Bilinear {
    pub mass: f64,
    pub element: AlgebraElement,
    /// Component of the region holding the slice-0 support of each factor.
    pub components: [Option<usize>; 2],
}

impl Bilinear {
    /// Builds the generator and locates both factors in `region`.
    pub fn in_region(st: &Arc<LatticeSpacetime>, region: &Region, mass: f64, f: &Profile, g: &Profile) -> Result<Self> {
        let element = bilinear_generator(st, mass, f, g)?;
        let locate = |h: &Profile| -> Option<usize> {
            let sites: Vec<usize> =
                (0..h.n_sites()).filter(|&x| h.q[x].norm() != 0.0 || h.p[x].norm() != 0.0).collect();
            let comps: std::collections::BTreeSet<Option<usize>> =
                sites.iter().map(|&x| region.component_of((0, x))).collect();
            match comps.len() {
                1 => comps.into_iter().next().flatten(),
                _ => None,
            }
        };
        Ok(Self { mass, element, components: [locate(f), locate(g)] })
    }

    /// False when the two factors sit in different connected components: the
    /// element is invariant but lies outside the algebra generated
    /// component by component.
    pub fn in_true_algebra(&self) -> bool {
        matches!(self.components, [Some(a), Some(b)] if a == b)
    }

    pub fn to_json(&self) -> BilinearJson {
        BilinearJson {
            mass: self.mass,
            components: self.components.to_vec(),
            in_true_algebra: self.in_true_algebra(),
            support: self.element.support().into_iter().collect(),
            terms: self.element.to_json(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearJson {
    pub mass: f64,
    pub components: Vec<Option<usize>>,
    pub in_true_algebra: bool,
    pub support: Vec<u32>,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    pub invariant: bool,
    /// max ‖ζ(g)a − a‖ over the sampled gauge elements.
    pub group_residual: f64,
    /// max ‖d/dλ ζ(1, λe_j*)a |_0‖ over the massless species.
    pub affine_derivative: f64,
}

/// Tests whether `a` is fixed by `samples` random gauge elements and by the
/// infinitesimal affine shifts.
pub fn invariant_projection_check<R: Rng + ?Sized>(
    rng: &mut R,
    st: &Arc<LatticeSpacetime>,
    a: &AlgebraElement,
    samples: usize,
) -> Result<InvarianceCheck> {
    if a.degree() > 4 {
        return Err(Error::DegreeCapExceeded { degree: a.degree() as usize, cap: 4 });
    }
    let mut group_residual: f64 = 0.0;
    for _ in 0..samples {
        let g = GaugeElement::random(rng, st.spectrum(), true);
        group_residual = group_residual.max(quantum_action(&g, st, a)?.distance(a)?);
    }
    let k = st.spectrum().massless_count();
    let mut affine_derivative: f64 = 0.0;
    for j in 0..k {
        let mut ell = vec![0.0; k];
        ell[j] = 1.0;
        let shift = GaugeElement::shift(st.spectrum(), ell)?.quantum_map(st)?;
        affine_derivative = affine_derivative.max(a.derivative(shift.shift())?.max_abs());
    }
    let tol = INVARIANCE_TOL * a.max_abs().max(1.0);
    Ok(InvarianceCheck {
        invariant: group_residual < tol && affine_derivative < tol,
        group_residual,
        affine_derivative,
    })
}

/// Φ(χ) for the constant solution of a massless species, with its
/// fixed-point status.
#[derive(Debug, Clone)]
pub struct CentralElement {
    pub species: usize,
    pub element: AlgebraElement,
    /// σ(χ, 1); zero because χ carries no momentum.
    pub charge: f64,
    /// Fixed by every ζ(1, ℓ). Always true on this lattice: ⟨ℓ, χ⟩ only sees
    /// momenta and χ has none.
    pub fixed_by_affine: bool,
    /// Fixed by the reflection of its own species.
    pub fixed_by_orthogonal: bool,
    /// Largest commutator with the generator sample.
    pub max_commutator: f64,
}

/// All bilinear generators built from pairs of basis profiles of the
/// charge-zero data, for every mass.
pub fn generator_sample(st: &Arc<LatticeSpacetime>) -> Result<Vec<AlgebraElement>> {
    let n = st.n_sites();
    let mut profiles = Vec::new();
    for x in 0..n {
        let mut q = vec![0.0; n];
        q[x] = 1.0;
        profiles.push((Profile::real(&q, &vec![0.0; n]), false));
        let mut p = vec![0.0; n];
        p[x] = 1.0;
        profiles.push((Profile::real(&vec![0.0; n], &p), false));
        if x + 1 < n {
            let mut d = vec![0.0; n];
            d[x] = 1.0;
            d[x + 1] = -1.0;
            profiles.push((Profile::real(&vec![0.0; n], &d), true));
        }
    }
    let mut out = Vec::new();
    for (m, _) in st.spectrum().blocks() {
        // massless blocks use the charge-zero momentum differences
        let usable: Vec<&Profile> =
            profiles.iter().filter(|(h, diff)| if m == 0.0 { profile_charge(h).norm() == 0.0 } else { !diff }).map(|(h, _)| h).collect();
        for i in 0..usable.len() {
            for j in i..usable.len() {
                out.push(bilinear_generator(st, m, usable[i], usable[j])?);
            }
        }
    }
    Ok(out)
}

/// The central elements Φ(χ_s), checked against [`generator_sample`].
pub fn central_elements(st: &Arc<LatticeSpacetime>) -> Result<Vec<CentralElement>> {
    let massless = massless_species(st);
    if massless.is_empty() {
        return Err(Error::NoMasslessSpecies);
    }
    let generators = generator_sample(st)?;
    let mut out = Vec::new();
    for (j, &s) in massless.iter().enumerate() {
        let chi = Solution::unit_constant(st, s)?;
        let element = AlgebraElement::field(&chi);
        let charge = symplectic_form(&chi, &chi)?.norm();
        let mut max_commutator: f64 = 0.0;
        for g in &generators {
            max_commutator = max_commutator.max(element.commutator(g)?.max_abs());
        }
        let mut ell = vec![0.0; massless.len()];
        ell[j] = 1.0;
        let shifted = GaugeElement::shift(st.spectrum(), ell)?.quantum_map(st)?.apply(&element)?;
        let mut blocks: Vec<nalgebra::DMatrix<f64>> = st
            .spectrum()
            .entries()
            .iter()
            .map(|&(_, k)| nalgebra::DMatrix::identity(k, k))
            .collect();
        blocks[0][(j, j)] = -1.0;
        let reflection = GaugeElement::new(st.spectrum(), blocks, vec![0.0; massless.len()])?;
        let reflected = quantum_action(&reflection, st, &element)?;
        out.push(CentralElement {
            species: s,
            charge,
            fixed_by_affine: shifted.distance(&element)? < INVARIANCE_TOL,
            fixed_by_orthogonal: reflected.distance(&element)? < INVARIANCE_TOL,
            max_commutator,
            element,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccr::oracle::WeylConverter;
    use crate::gauge::ell_functional;
    use crate::lattice::{multi_diamond, SiteInterval};
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(spec: &str) -> Arc<LatticeSpacetime> {
        Arc::new(LatticeSpacetime::new(6, 8, 0.5, spec.parse().unwrap()).unwrap())
    }

    fn random_profile<R: Rng>(rng: &mut R, n: usize, charge_zero: bool) -> Profile {
        let q: Vec<f64> = (0..n).map(|_| sampling::normal(rng)).collect();
        let mut p: Vec<f64> = (0..n).map(|_| sampling::normal(rng)).collect();
        if charge_zero {
            let mean = p.iter().sum::<f64>() / n as f64;
            p.iter_mut().for_each(|v| *v -= mean);
        }
        Profile::real(&q, &p)
    }

    #[test]
    fn charge_zero_subspace() {
        let s = st("0:2,1:1");
        let cz = ChargeZeroSubspace::new(&s).unwrap();
        assert_eq!(cz.codimension(), 2);
        for b in cz.basis() {
            assert!(cz.charges(b).unwrap().iter().all(|c| c.norm() < 1e-12));
        }
        for (j, th) in cz.theta().iter().enumerate() {
            let c = cz.charges(th).unwrap();
            for (k, ck) in c.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((ck - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = sampling::real_solution(&mut rng, &s);
        assert!(cz.contains(&cz.project(&phi).unwrap(), 1e-12).unwrap());
    }

    #[test]
    fn bilinear_is_invariant() {
        let s = st("0:2,1:2");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mass in [0.0, 1.0] {
            let (f, g) = (random_profile(&mut rng, 6, true), random_profile(&mut rng, 6, true));
            let b = bilinear_generator(&s, mass, &f, &g).unwrap();
            for _ in 0..50 {
                let gel = GaugeElement::random(&mut rng, s.spectrum(), true);
                assert!(quantum_action(&gel, &s, &b).unwrap().distance(&b).unwrap() < 1e-10);
            }
            let chk = invariant_projection_check(&mut rng, &s, &b, 10).unwrap();
            assert!(chk.invariant, "{chk:?}");
        }
        let z = Profile::real(&[0.0; 6], &[0.0; 6]);
        assert_eq!(bilinear_generator(&s, 1.0, &z, &z).unwrap().max_abs(), 0.0);
        let charged = Profile::real(&[0.0; 6], &[1.0; 6]);
        assert!(matches!(bilinear_generator(&s, 0.0, &charged, &charged), Err(Error::NotChargeZero(_))));
        assert!(matches!(bilinear_generator(&s, 2.0, &z, &z), Err(Error::MassNotInSpectrum(_))));
    }

    #[test]
    fn bilinear_parts_match_exact_product() {
        let s = st("1:2");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (f, g) = (random_profile(&mut rng, 6, false), random_profile(&mut rng, 6, false));
        let b = bilinear_generator(&s, 1.0, &f, &g).unwrap();
        assert!(b.degree() <= 2);
        // degree 0: (i/2) Σ_i σ(f⊗e_i, g⊗e_i)
        let mut want = C64::new(0.0, 0.0);
        let mut sym = AlgebraElement::zero(PhaseSpace::of(&s));
        for sp in 0..2 {
            let (a, c) = (Solution::embed(&s, &f, sp).unwrap(), Solution::embed(&s, &g, sp).unwrap());
            want += C64::new(0.0, 0.5) * symplectic_form(&a, &c).unwrap();
            sym = sym.add(&AlgebraElement::field(&a).sym_product(&AlgebraElement::field(&c)).unwrap()).unwrap();
        }
        assert!((b.coefficient(&[]) - want).norm() < 1e-12);
        assert!(b.part(2).distance(&sym).unwrap() < 1e-12);
        // the exact word oracle agrees on the full element
        let mut conv = WeylConverter::new(PhaseSpace::of(&s));
        let mut words = crate::ccr::oracle::WordElement::zero(PhaseSpace::of(&s));
        for sp in 0..2 {
            let (a, c) = (Solution::embed(&s, &f, sp).unwrap(), Solution::embed(&s, &g, sp).unwrap());
            let wa = conv.convert(&AlgebraElement::field(&a)).unwrap();
            let wc = conv.convert(&AlgebraElement::field(&c)).unwrap();
            words = words.add(&wa.product(&wc));
        }
        assert!(conv.convert(&b).unwrap().distance(&words) < 1e-10);
    }

    #[test]
    fn non_invariant_elements() {
        let s = st("0:1,1:1,2:1");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (f, g) = (random_profile(&mut rng, 6, false), random_profile(&mut rng, 6, false));
        let mixed = species_bilinear(&s, 1, &f, 2, &g).unwrap();
        let chk = invariant_projection_check(&mut rng, &s, &mixed, 10).unwrap();
        assert!(!chk.invariant && chk.group_residual > 1e-3);
        let cz = ChargeZeroSubspace::new(&s).unwrap();
        let theta = AlgebraElement::field(&cz.theta()[0]);
        let chk = invariant_projection_check(&mut rng, &s, &theta, 4).unwrap();
        assert!(!chk.invariant && chk.affine_derivative > 0.5);
        // the λ-coefficient is ⟨e*, θ⟩ = 1
        assert!((ell_functional(&[1.0], &cz.theta()[0]).unwrap().re - 1.0).abs() < 1e-14);
        let one = AlgebraElement::unit(PhaseSpace::of(&s));
        let chk = invariant_projection_check(&mut rng, &s, &one, 4).unwrap();
        assert_eq!((chk.invariant, chk.group_residual, chk.affine_derivative), (true, 0.0, 0.0));
    }

    #[test]
    fn products_of_generators_stay_invariant() {
        let s = st("0:1,1:2");
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let gen = |rng: &mut ChaCha8Rng| {
                let m = if rng.random_bool(0.5) { 0.0 } else { 1.0 };
                let (f, g) = (random_profile(rng, 6, true), random_profile(rng, 6, true));
                bilinear_generator(&s, m, &f, &g).unwrap()
            };
            let (a, b) = (gen(&mut rng), gen(&mut rng));
            let prod = a.product(&b.star()).unwrap();
            let chk = invariant_projection_check(&mut rng, &s, &prod, 3).unwrap();
            assert!(chk.invariant, "{chk:?}");
        }
    }

    #[test]
    fn central_elements_commute() {
        let s = st("0:1,1:1");
        let cs = central_elements(&s).unwrap();
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert!(c.max_commutator < 1e-12 && c.element.max_abs() > 0.5);
        assert_eq!(c.charge, 0.0);
        assert!(c.fixed_by_affine && !c.fixed_by_orthogonal);
        assert_eq!(central_elements(&st("1:1")).unwrap_err(), Error::NoMasslessSpecies);
    }

    #[test]
    fn cross_component_flag() {
        let s = st("1:2");
        let region = multi_diamond(&[(0, SiteInterval::new(0, 2)), (0, SiteInterval::new(3, 2))], &s).unwrap();
        let bump = |x: usize| {
            let mut q = vec![0.0; 6];
            q[x] = 1.0;
            Profile::real(&q, &[0.0; 6])
        };
        let same = Bilinear::in_region(&s, &region, 1.0, &bump(0), &bump(1)).unwrap();
        let cross = Bilinear::in_region(&s, &region, 1.0, &bump(0), &bump(4)).unwrap();
        assert!(same.in_true_algebra());
        assert!(!cross.in_true_algebra());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(invariant_projection_check(&mut rng, &s, &cross.element, 10).unwrap().invariant);
        assert!(!cross.to_json().in_true_algebra);
    }
}
