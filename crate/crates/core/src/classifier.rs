//! Numerical classification of infinitesimal symmetries of the classical
//! theory.
//!
//! Unknowns are real linear maps δS of Cauchy data that commute with the
//! spatial shift and the one-step evolution. Shift invariance is built in by
//! the circulant parametrization X[(a, x+d), (b, x)] = p(a, b, d), with a, b
//! running over (species, component) pairs. Preservation of the pointwise
//! null energy, linearized at the identity and polarized, gives for each
//! lattice point, null sign and pair of sample solutions φ_i, φ_j the row
//!
//! v(δS φ_i)·v(φ_j) + v(δS φ_j)·v(φ_i) = 0,
//!
//! where v(φ)_s = p_s + s·(q_s(x+1) − q_s(x−1))/2 on the slice of the point.
//! The expected solution space is ⊕_m so(ν(m)) acting on species.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{
    null_energy_density, one_step_matrix, rce_matrix, symplectic_matrix, translation_matrix, NullSign,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpacetime;
use crate::linalg::{expm, max_abs, max_principal_sine, nullspace, orthonormalize, singular_values, RowCompressor};
use crate::sampling;

pub const MAX_SITES: usize = 16;
pub const MAX_SPECIES: usize = 5;
/// Relative singular-value threshold for ranks and nullspaces.
pub const RANK_TOL: f64 = 1e-8;
pub const MATCH_TOL: f64 = 1e-9;

fn check_budget(st: &LatticeSpacetime) -> Result<()> {
    if st.n_sites() > MAX_SITES || st.species_count() > MAX_SPECIES {
        return Err(Error::BudgetExceeded(format!(
            "{} sites and {} species (limits {MAX_SITES} and {MAX_SPECIES})",
            st.n_sites(),
            st.species_count()
        )));
    }
    Ok(())
}

/// Real basis of a subspace of shift-commuting maps, stored as circulant
/// parameter vectors (columns of `params`).
#[derive(Debug, Clone)]
pub struct CommutantBasis {
    spacetime: Arc<LatticeSpacetime>,
    params: DMatrix<f64>,
}

impl CommutantBasis {
    pub fn dim(&self) -> usize {
        self.params.ncols()
    }

    pub fn spacetime(&self) -> &Arc<LatticeSpacetime> {
        &self.spacetime
    }

    fn blocks(&self) -> usize {
        2 * self.spacetime.species_count()
    }

    fn param_index(&self, a: usize, b: usize, d: usize) -> usize {
        (a * self.blocks() + b) * self.spacetime.n_sites() + d
    }

    /// Dense matrix of `Σ_k coeffs[k] · basis_k`.
    pub fn combination(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let p = &self.params * nalgebra::DVector::from_column_slice(coeffs);
        self.expand(p.as_slice())
    }

    pub fn element(&self, k: usize) -> DMatrix<f64> {
        self.expand(self.params.column(k).as_slice())
    }

    fn expand(&self, p: &[f64]) -> DMatrix<f64> {
        let (n, nb) = (self.spacetime.n_sites(), self.blocks());
        let d = nb * n;
        let mut m = DMatrix::zeros(d, d);
        for a in 0..nb {
            for b in 0..nb {
                for dd in 0..n {
                    let v = p[self.param_index(a, b, dd)];
                    if v == 0.0 {
                        continue;
                    }
                    for x in 0..n {
                        m[(a * n + (x + dd) % n, b * n + x)] = v;
                    }
                }
            }
        }
        m
    }

    /// Rows `k · basis_a` for every basis element, as a (basis × D) matrix
    /// per input row.
    fn row_times(&self, k: &[f64]) -> DMatrix<f64> {
        let (n, nb) = (self.spacetime.n_sites(), self.blocks());
        let d = nb * n;
        // raw[(b,x)] contribution per parameter (a,b,dd) is k[(a, x+dd)]
        let mut out = DMatrix::zeros(self.dim(), d);
        for a in 0..nb {
            for dd in 0..n {
                let shifted: Vec<f64> = (0..n).map(|x| k[a * n + (x + dd) % n]).collect();
                if shifted.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for b in 0..nb {
                    let row = self.params.row(self.param_index(a, b, dd));
                    for (c, &w) in row.iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        for x in 0..n {
                            out[(c, b * n + x)] += w * shifted[x];
                        }
                    }
                }
            }
        }
        out
    }

    /// Coordinates of a dense shift-commuting matrix in this basis (least
    /// squares) and the residual of the fit.
    pub fn coordinates(&self, m: &DMatrix<f64>) -> (Vec<f64>, f64) {
        let (n, nb) = (self.spacetime.n_sites(), self.blocks());
        let mut p = nalgebra::DVector::zeros(nb * nb * n);
        for a in 0..nb {
            for b in 0..nb {
                for dd in 0..n {
                    p[self.param_index(a, b, dd)] = m[(a * n + dd % n, b * n)];
                }
            }
        }
        let svd = self.params.clone().svd(true, true);
        let c = svd.solve(&p, 1e-12).expect("SVD solve");
        let resid = max_abs(&(self.combination(c.as_slice()) - m));
        (c.iter().copied().collect(), resid)
    }
}

/// All real maps commuting with the spatial shift and the one-step map.
pub fn build_commutant_basis(st: &Arc<LatticeSpacetime>) -> Result<CommutantBasis> {
    check_budget(st)?;
    let (n, nb) = (st.n_sites(), 2 * st.species_count());
    let d = nb * n;
    let np = nb * nb * n;
    let u = one_step_matrix(st);
    let pidx = |a: usize, b: usize, dd: usize| (a * nb + b) * n + dd;
    // (XU − UX) on the columns of site 0; shift invariance covers the rest
    let mut rows = DMatrix::zeros(nb * d, np);
    for b0 in 0..nb {
        let j0 = b0 * n;
        for a in 0..nb {
            for y in 0..n {
                let i = a * n + y;
                let r = b0 * d + i;
                for b in 0..nb {
                    for dd in 0..n {
                        let x = (y + n - dd) % n;
                        rows[(r, pidx(a, b, dd))] += u[(b * n + x, j0)];
                    }
                }
                for a2 in 0..nb {
                    for y2 in 0..n {
                        rows[(r, pidx(a2, b0, y2))] -= u[(i, a2 * n + y2)];
                    }
                }
            }
        }
    }
    let (params, _) = nullspace(&rows, RANK_TOL);
    Ok(CommutantBasis { spacetime: st.clone(), params })
}

/// Closed-form commutant dimension 2N Σ_m ν(m)²: every Fourier block of the
/// one-step map has eigenvalues e^{±iθ_m(k)} of multiplicity ν(m), distinct
/// across masses (or a Jordan block for the massless zero mode, with the same
/// count).
pub fn expected_commutant_dimension(st: &LatticeSpacetime) -> usize {
    2 * st.n_sites() * st.spectrum().entries().iter().map(|&(_, k)| k * k).sum::<usize>()
}

/// Projector onto the zero mode of the massless species.
pub fn zero_mode_projector(st: &LatticeSpacetime) -> DMatrix<f64> {
    let (n, d) = (st.n_sites(), st.phase_dim());
    let mut p = DMatrix::zeros(d, d);
    for s in crate::gauge::massless_species(st) {
        for c in 0..2 {
            for x in 0..n {
                for y in 0..n {
                    p[(st.index(s, c, x), st.index(s, c, y))] = 1.0 / n as f64;
                }
            }
        }
    }
    p
}

/// Subspace of the commutant annihilating the massless zero mode, and the
/// dimension removed.
pub fn reduced_commutant(basis: &CommutantBasis) -> (CommutantBasis, usize) {
    let st = basis.spacetime.clone();
    let n = st.n_sites();
    let massless = crate::gauge::massless_species(&st);
    if massless.is_empty() {
        return (basis.clone(), 0);
    }
    let d = st.phase_dim();
    let mut rows = DMatrix::zeros(d * 2 * massless.len(), basis.dim());
    for k in 0..basis.dim() {
        let m = basis.element(k);
        let mut r = 0;
        for &s in &massless {
            for c in 0..2 {
                for i in 0..d {
                    rows[(r + i, k)] = (0..n).map(|x| m[(i, st.index(s, c, x))]).sum();
                }
                r += d;
            }
        }
    }
    let (coef, _) = nullspace(&rows, RANK_TOL);
    let params = &basis.params * coef;
    let removed = basis.dim() - params.ncols();
    (CommutantBasis { spacetime: st, params }, removed)
}

/// Linear functionals v_s on slice-0 data for the point (t, x) and a null
/// sign: one row per species, evolved back through `u_t = U^t`.
fn null_rows(st: &LatticeSpacetime, u_t: &DMatrix<f64>, x: usize, sign: NullSign) -> DMatrix<f64> {
    let (n, ns, d) = (st.n_sites(), st.species_count(), st.phase_dim());
    let mut l = DMatrix::zeros(ns, d);
    for s in 0..ns {
        l[(s, st.index(s, 1, x))] = 1.0;
        l[(s, st.index(s, 0, (x + 1) % n))] += 0.5 * sign.value();
        l[(s, st.index(s, 0, (x + n - 1) % n))] -= 0.5 * sign.value();
    }
    l * u_t
}

/// Sample for the linearized null-energy constraints: real solutions
/// (columns) and lattice points.
#[derive(Debug, Clone)]
pub struct SetSample {
    pub solutions: DMatrix<f64>,
    pub points: Vec<(usize, usize, NullSign)>,
}

impl SetSample {
    /// All canonical basis solutions (zero mode of massless species removed)
    /// at every site of slices `0..slices`, both signs.
    pub fn canonical(st: &LatticeSpacetime, slices: usize) -> Self {
        let d = st.phase_dim();
        let solutions = DMatrix::identity(d, d) - zero_mode_projector(st);
        let points = (0..slices.min(st.n_steps()))
            .flat_map(|t| (0..st.n_sites()).flat_map(move |x| NullSign::BOTH.map(|s| (t, x, s))))
            .collect();
        Self { solutions, points }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, st: &LatticeSpacetime, n_solutions: usize, n_points: usize) -> Self {
        let d = st.phase_dim();
        let raw = DMatrix::from_fn(d, n_solutions, |_, _| sampling::normal(rng));
        let solutions = (DMatrix::identity(d, d) - zero_mode_projector(st)) * raw;
        let points = (0..n_points)
            .map(|_| {
                let s = if rng.random_bool(0.5) { NullSign::Plus } else { NullSign::Minus };
                (rng.random_range(0..st.n_steps()), rng.random_range(0..st.n_sites()), s)
            })
            .collect();
        Self { solutions, points }
    }

    /// True if the sample spans all zero-mode-free data, covers a full
    /// spatial period and uses both null signs.
    pub fn is_complete(&self, st: &LatticeSpacetime) -> bool {
        let target = st.phase_dim() - 2 * st.spectrum().massless_count();
        let sites: std::collections::BTreeSet<usize> = self.points.iter().map(|p| p.1).collect();
        let signs: std::collections::BTreeSet<bool> = self.points.iter().map(|p| p.2 == NullSign::Plus).collect();
        crate::linalg::rank(&self.solutions, 1e-10) == target && sites.len() == st.n_sites() && signs.len() == 2
    }
}

fn powers(st: &LatticeSpacetime, max_t: usize) -> Vec<DMatrix<f64>> {
    let u = one_step_matrix(&Arc::new(st.clone()));
    let mut out = vec![DMatrix::identity(st.phase_dim(), st.phase_dim())];
    for t in 1..=max_t {
        let next = &out[t - 1] * &u;
        out.push(next);
    }
    out
}

/// Constraint rows of one point for all basis elements: a
/// (pairs × basis) matrix.
fn point_rows(basis: &CommutantBasis, k: &DMatrix<f64>, phi: &DMatrix<f64>) -> DMatrix<f64> {
    let ns = k.nrows();
    let m = k * phi; // ns × K
    let kk = phi.ncols();
    let pairs = kk * (kk + 1) / 2;
    let mut rows = DMatrix::zeros(pairs, basis.dim());
    let kb: Vec<DMatrix<f64>> = (0..ns).map(|s| basis.row_times(k.row(s).transpose().as_slice())).collect();
    // kb[s] is basis × D; M_a[s, i] = (kb[s] φ)[a, i]
    let ma: Vec<DMatrix<f64>> = kb.iter().map(|r| r * phi).collect();
    for a in 0..basis.dim() {
        let mut r = 0;
        for i in 0..kk {
            for j in i..kk {
                let mut v = 0.0;
                for s in 0..ns {
                    v += ma[s][(a, i)] * m[(s, j)] + ma[s][(a, j)] * m[(s, i)];
                }
                rows[(r, a)] = v;
                r += 1;
            }
        }
    }
    rows
}

/// Assembled linear system for basis coefficients, kept in compressed form.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    basis: CommutantBasis,
    compressor: RowCompressor,
    /// Rank after each pushed batch.
    pub ranks: Vec<usize>,
    pub rows_seen: usize,
}

impl ConstraintSystem {
    pub fn new(basis: CommutantBasis) -> Self {
        let dim = basis.dim();
        Self { basis, compressor: RowCompressor::new(dim), ranks: vec![], rows_seen: 0 }
    }

    pub fn basis(&self) -> &CommutantBasis {
        &self.basis
    }

    pub fn push(&mut self, sample: &SetSample) -> Result<()> {
        let st = self.basis.spacetime.clone();
        if sample.solutions.nrows() != st.phase_dim() {
            return Err(Error::DomainMismatch("sample solutions have the wrong dimension".into()));
        }
        let max_t = sample.points.iter().map(|p| p.0).max().unwrap_or(0);
        let pw = powers(&st, max_t);
        for &(t, x, sign) in &sample.points {
            let k = null_rows(&st, &pw[t], x, sign);
            let rows = point_rows(&self.basis, &k, &sample.solutions);
            self.rows_seen += rows.nrows();
            self.compressor.push(&rows);
        }
        self.ranks.push(self.compressor.rank(RANK_TOL));
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.compressor.rank(RANK_TOL)
    }

    /// Basis coefficients of the solution space (columns) and the ratio of
    /// largest to smallest retained singular value.
    pub fn solve(&self) -> (DMatrix<f64>, f64) {
        let r = self.compressor.matrix();
        let (ns, _) = nullspace(r, RANK_TOL);
        let s = singular_values(r);
        let smax = s.first().copied().unwrap_or(0.0);
        let kept: Vec<f64> = s.into_iter().filter(|&v| v > RANK_TOL * smax).collect();
        let cond = match kept.last() {
            Some(&v) if v > 0.0 => smax / v,
            _ => 1.0,
        };
        (ns, cond)
    }
}

/// Assembles the constraint system for `sample` over `basis`.
pub fn linearized_set_constraints(basis: &CommutantBasis, sample: &SetSample) -> Result<ConstraintSystem> {
    let mut sys = ConstraintSystem::new(basis.clone());
    sys.push(sample)?;
    Ok(sys)
}

/// Largest constraint row for an arbitrary map δS evaluated directly.
pub fn set_constraint_residual(st: &LatticeSpacetime, ds: &DMatrix<f64>, sample: &SetSample) -> f64 {
    let max_t = sample.points.iter().map(|p| p.0).max().unwrap_or(0);
    let pw = powers(st, max_t);
    let phi = &sample.solutions;
    let dphi = ds * phi;
    let mut worst: f64 = 0.0;
    for &(t, x, sign) in &sample.points {
        let k = null_rows(st, &pw[t], x, sign);
        let (m, md) = (&k * phi, &k * &dphi);
        let g = md.transpose() * &m;
        worst = worst.max(max_abs(&(&g + g.transpose())));
    }
    worst
}

/// Species-space generator (E_ab − E_ba) in mass block `block`, acting on
/// Cauchy data.
pub fn species_generator(st: &LatticeSpacetime, a: usize, b: usize) -> DMatrix<f64> {
    let (n, d) = (st.n_sites(), st.phase_dim());
    let mut m = DMatrix::zeros(d, d);
    for c in 0..2 {
        for x in 0..n {
            m[(st.index(a, c, x), st.index(b, c, x))] = 1.0;
            m[(st.index(b, c, x), st.index(a, c, x))] = -1.0;
        }
    }
    m
}

/// The expected generators ⊕_m so(ν(m)).
pub fn expected_generators(st: &LatticeSpacetime) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for (_, range) in st.spectrum().blocks() {
        for a in range.clone() {
            for b in a + 1..range.end {
                out.push(species_generator(st, a, b));
            }
        }
    }
    out
}

fn flatten(ms: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols: Vec<nalgebra::DVector<f64>> =
        ms.iter().map(|m| nalgebra::DVector::from_column_slice(m.as_slice())).collect();
    if cols.is_empty() {
        return DMatrix::zeros(0, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Species matrix A of a map of the form A ⊗ 1, with the deviation from that
/// form.
pub fn species_part(st: &LatticeSpacetime, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let ns = st.species_count();
    let a = DMatrix::from_fn(ns, ns, |i, j| g[(st.index(i, 0, 0), st.index(j, 0, 0))]);
    let mut full = DMatrix::zeros(st.phase_dim(), st.phase_dim());
    for i in 0..ns {
        for j in 0..ns {
            for c in 0..2 {
                for x in 0..st.n_sites() {
                    full[(st.index(i, c, x), st.index(j, c, x))] = a[(i, j)];
                }
            }
        }
    }
    let dev = max_abs(&(&full - g));
    (a, dev)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SoundnessResiduals {
    pub symplectic: f64,
    pub null_energy: f64,
    pub rce_commutation: f64,
    pub evolution_commutation: f64,
    pub translation_commutation: f64,
}

impl SoundnessResiduals {
    pub fn max(&self) -> f64 {
        [self.symplectic, self.null_energy, self.rce_commutation, self.evolution_commutation, self.translation_commutation]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn merge(&mut self, o: &SoundnessResiduals) {
        self.symplectic = self.symplectic.max(o.symplectic);
        self.null_energy = self.null_energy.max(o.null_energy);
        self.rce_commutation = self.rce_commutation.max(o.rce_commutation);
        self.evolution_commutation = self.evolution_commutation.max(o.evolution_commutation);
        self.translation_commutation = self.translation_commutation.max(o.translation_commutation);
    }
}

/// Checks that `s` is a genuine symmetry of the classical theory: symplectic,
/// null-energy preserving at every point for random solutions, and commuting
/// with evolution, translations and random relative Cauchy evolutions.
pub fn verify_endomorphism<R: Rng + ?Sized>(
    rng: &mut R,
    st: &Arc<LatticeSpacetime>,
    s: &DMatrix<f64>,
    rce_maps: &[DMatrix<f64>],
) -> SoundnessResiduals {
    let j = symplectic_matrix(st);
    let symplectic = max_abs(&(s.transpose() * &j * s - &j));
    let mut null_energy: f64 = 0.0;
    for _ in 0..3 {
        let phi = sampling::real_solution(rng, st);
        let sphi = phi.apply(s);
        for sign in NullSign::BOTH {
            let (a, b) = (null_energy_density(&phi, sign), null_energy_density(&sphi, sign));
            for (ra, rb) in a.iter().zip(&b) {
                for (va, vb) in ra.iter().zip(rb) {
                    null_energy = null_energy.max((va - vb).abs());
                }
            }
        }
    }
    let comm = |m: &DMatrix<f64>| max_abs(&(s * m - m * s));
    let rce_commutation = rce_maps.iter().map(comm).fold(0.0, f64::max);
    SoundnessResiduals {
        symplectic,
        null_energy,
        rce_commutation,
        evolution_commutation: comm(&one_step_matrix(st)),
        translation_commutation: comm(&translation_matrix(st, 0, 1)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCheck {
    pub species: usize,
    /// Homomorphism defect of ζ(1, λ e_j*) on random products.
    pub homomorphism: f64,
    /// Defect of ζ(1, λe_j*)∘ζ(1, μe_j*) = ζ(1, (λ+μ)e_j*).
    pub one_parameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub spectrum: String,
    pub n_sites: usize,
    pub commutant_dimension: usize,
    pub commutant_expected: usize,
    pub zero_mode_quarantined: usize,
    pub dimension: usize,
    pub expected: usize,
    #[serde(rename = "match")]
    pub matched: bool,
    pub principal_sine: f64,
    pub condition: f64,
    pub batch_ranks: Vec<usize>,
    pub constraint_rows: usize,
    /// Species matrices of the generators, projected from the expected basis.
    pub generators: Vec<Vec<Vec<f64>>>,
    /// Deviation of the found generators from the species-matrix form.
    pub generator_form_residual: f64,
    pub soundness: SoundnessResiduals,
    pub reflections: SoundnessResiduals,
    pub affine: Vec<AffineCheck>,
}

/// Classifies the infinitesimal symmetries of the classical theory on `st`.
/// With `quantized`, the affine shifts of the massless fields are verified
/// as algebra automorphisms and appended to the report.
pub fn classify<R: Rng + ?Sized>(rng: &mut R, st: &Arc<LatticeSpacetime>, quantized: bool) -> Result<ClassificationReport> {
    check_budget(st)?;
    let full = build_commutant_basis(st)?;
    let (reduced, quarantined) = reduced_commutant(&full);
    let mut sys = ConstraintSystem::new(reduced.clone());
    sys.push(&SetSample::canonical(st, 2))?;
    for _ in 0..3 {
        let k = st.phase_dim().min(12);
        sys.push(&SetSample::random(rng, st, k, 4))?;
    }
    if sys.ranks.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InsufficientSamples(format!("ranks per batch {:?}", sys.ranks)));
    }
    let (coef, condition) = sys.solve();
    let found: Vec<DMatrix<f64>> = (0..coef.ncols()).map(|k| reduced.combination(coef.column(k).as_slice())).collect();

    let p0 = zero_mode_projector(st);
    let id = DMatrix::identity(st.phase_dim(), st.phase_dim());
    let expected = expected_generators(st);
    let expected_reduced: Vec<DMatrix<f64>> = expected.iter().map(|e| e * (&id - &p0)).collect();
    let (u_found, u_exp) = (orthonormalize(&flatten(&found), 1e-12), orthonormalize(&flatten(&expected_reduced), 1e-12));
    let principal_sine = if found.is_empty() && expected.is_empty() { 0.0 } else { max_principal_sine(&u_exp, &u_found) };
    let matched = found.len() == expected.len() && principal_sine < MATCH_TOL;

    // generators to verify: the expected ones restored on the zero mode when
    // matched, the raw nullspace otherwise
    let generators: Vec<DMatrix<f64>> = if matched {
        expected
            .iter()
            .zip(&expected_reduced)
            .map(|(e, er)| {
                let v = nalgebra::DVector::from_column_slice(er.as_slice());
                let proj = &u_found * (u_found.transpose() * &v);
                let restored = DMatrix::from_column_slice(er.nrows(), er.ncols(), proj.as_slice());
                restored + e * &p0
            })
            .collect()
    } else {
        found.clone()
    };
    let mut generator_form_residual: f64 = 0.0;
    let mut species = Vec::new();
    for g in &generators {
        let (a, dev) = species_part(st, g);
        generator_form_residual = generator_form_residual.max(dev);
        species.push(a.row_iter().map(|r| r.iter().copied().collect()).collect());
    }

    let rce_maps = (0..3)
        .map(|_| rce_matrix(st, &sampling::random_perturbation(rng, st, false)))
        .collect::<Result<Vec<_>>>()?;
    let mut soundness = SoundnessResiduals::default();
    for g in &generators {
        let s = expm(g);
        soundness.merge(&verify_endomorphism(rng, st, &s, &rce_maps));
    }
    let mut reflections = SoundnessResiduals::default();
    for (_, range) in st.spectrum().blocks() {
        let mut r = id.clone();
        for c in 0..2 {
            for x in 0..st.n_sites() {
                let i = st.index(range.start, c, x);
                r[(i, i)] = -1.0;
            }
        }
        reflections.merge(&verify_endomorphism(rng, st, &r, &rce_maps));
    }
    let affine = if quantized { affine_checks(rng, st)? } else { vec![] };
    Ok(ClassificationReport {
        spectrum: st.spectrum().to_string(),
        n_sites: st.n_sites(),
        commutant_dimension: full.dim(),
        commutant_expected: expected_commutant_dimension(st),
        zero_mode_quarantined: quarantined,
        dimension: found.len(),
        expected: expected.len(),
        matched,
        principal_sine,
        condition,
        batch_ranks: sys.ranks.clone(),
        constraint_rows: sys.rows_seen,
        generators: species,
        generator_form_residual,
        soundness,
        reflections,
        affine,
    })
}

fn affine_checks<R: Rng + ?Sized>(rng: &mut R, st: &Arc<LatticeSpacetime>) -> Result<Vec<AffineCheck>> {
    use crate::ccr::PhaseSpace;
    use crate::gauge::{massless_species, GaugeElement};
    let space = PhaseSpace::of(st);
    let k = st.spectrum().massless_count();
    let mut out = Vec::new();
    for (j, s) in massless_species(st).into_iter().enumerate() {
        let shift = |lambda: f64| {
            let mut ell = vec![0.0; k];
            ell[j] = lambda;
            GaugeElement::shift(st.spectrum(), ell).and_then(|g| g.quantum_map(st))
        };
        let (lam, mu) = (0.8, -1.3);
        let (zl, zm, zlm) = (shift(lam)?, shift(mu)?, shift(lam + mu)?);
        let mut homomorphism: f64 = 0.0;
        let mut one_parameter: f64 = 0.0;
        let pool: Vec<u32> = (0..2).flat_map(|c| (0..2).map(move |x| st.index(s, c, x) as u32)).collect();
        for _ in 0..5 {
            let (a, _) = sampling::integer_element(rng, space, &pool, 2, 3);
            let (b, _) = sampling::integer_element(rng, space, &pool, 2, 3);
            let lhs = zl.apply(&a.product(&b)?)?;
            let rhs = zl.apply(&a)?.product(&zl.apply(&b)?)?;
            homomorphism = homomorphism.max(lhs.distance(&rhs)?);
            one_parameter = one_parameter.max(zl.apply(&zm.apply(&a)?)?.distance(&zlm.apply(&a)?)?);
        }
        out.push(AffineCheck { species: s, homomorphism, one_parameter });
    }
    Ok(out)
}

/// Commutant dimension by counting per Fourier mode: the real nullspace of
/// X ↦ X U_k − U_k X for the 2|ν|×2|ν| mode map U_k.
pub fn mode_count_commutant_dimension(st: &LatticeSpacetime) -> usize {
    let n = st.n_sites();
    let ns = st.species_count();
    let masses = st.spectrum().species_masses();
    let dt = st.dt();
    let mut total = 0;
    for k in 0..n {
        let mut uk = DMatrix::zeros(2 * ns, 2 * ns);
        for (s, m) in masses.iter().enumerate() {
            let lam = crate::lattice::mode_eigenvalue(*m, k, n);
            let a = 1.0 - 0.5 * dt * dt * lam;
            uk[(2 * s, 2 * s)] = a;
            uk[(2 * s, 2 * s + 1)] = dt;
            uk[(2 * s + 1, 2 * s)] = -dt * lam * (1.0 - 0.25 * dt * dt * lam);
            uk[(2 * s + 1, 2 * s + 1)] = a;
        }
        let d = 2 * ns;
        let id = DMatrix::<f64>::identity(d, d);
        let op = id.kronecker(&uk.transpose()) - uk.kronecker(&id);
        total += nullspace(&op, RANK_TOL).0.ncols();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(spec: &str, n: usize) -> Arc<LatticeSpacetime> {
        Arc::new(LatticeSpacetime::new(n, 8, 0.5, spec.parse().unwrap()).unwrap())
    }

    #[test]
    fn commutant_dimension_matches_mode_count() {
        for (spec, n) in [("1:1", 6), ("1:2", 6), ("0:1,1:1", 6), ("1:1,2:2", 5)] {
            let s = st(spec, n);
            let b = build_commutant_basis(&s).unwrap();
            assert_eq!(b.dim(), expected_commutant_dimension(&s), "{spec}");
            assert_eq!(mode_count_commutant_dimension(&s), expected_commutant_dimension(&s), "{spec}");
        }
    }

    #[test]
    fn commutant_members() {
        let s = st("1:1", 6);
        let b = build_commutant_basis(&s).unwrap();
        let u = one_step_matrix(&s);
        let uinv = u.clone().try_inverse().unwrap();
        let d = s.phase_dim();
        for m in [DMatrix::identity(d, d), &u - &uinv] {
            let (_, resid) = b.coordinates(&m);
            assert!(resid < 1e-12, "{resid}");
        }
        let s2 = st("1:2", 6);
        let b2 = build_commutant_basis(&s2).unwrap();
        let (_, resid) = b2.coordinates(&species_generator(&s2, 0, 1));
        assert!(resid < 1e-12);
        for k in 0..b2.dim() {
            let m = b2.element(k);
            assert!(max_abs(&(&m * &one_step_matrix(&s2) - one_step_matrix(&s2) * &m)) < 1e-10);
        }
    }

    #[test]
    fn reduced_commutant_quarantines_zero_mode() {
        let s = st("0:2", 6);
        let b = build_commutant_basis(&s).unwrap();
        let (r, removed) = reduced_commutant(&b);
        assert_eq!(removed, 2 * 2 * 2);
        assert_eq!(r.dim(), b.dim() - 8);
    }

    #[test]
    fn constraint_rows_distinguish_generators() {
        let s = st("1:2", 6);
        let sample = SetSample::canonical(&s, 1);
        assert!(sample.is_complete(&s));
        let rot = species_generator(&s, 0, 1);
        assert!(set_constraint_residual(&s, &rot, &sample) < 1e-12);
        let d = s.phase_dim();
        let sym = DMatrix::identity(d, d);
        assert!(set_constraint_residual(&s, &sym, &sample) > 1e-3);
        let u = one_step_matrix(&s);
        let phase = &u - u.clone().try_inverse().unwrap();
        assert!(set_constraint_residual(&s, &phase, &sample) > 1e-3);
    }

    #[test]
    fn classify_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = classify(&mut rng, &st("1:2", 6), false).unwrap();
        assert_eq!((r.dimension, r.expected, r.matched), (1, 1, true));
        assert!(r.soundness.max() < 1e-8, "{:?}", r.soundness);
        assert!(r.reflections.max() < 1e-9, "{:?}", r.reflections);
        let g = &r.generators[0];
        assert!((g[0][1] + g[1][0]).abs() < 1e-9 && g[0][1].abs() > 0.5);
    }

    #[test]
    fn classify_reference_spectra() {
        for (spec, want) in [("1:1", 0), ("1:2", 1), ("1:2,2:3", 4), ("1:3", 3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let s = Arc::new(LatticeSpacetime::new(8, 16, 0.5, spec.parse().unwrap()).unwrap());
            let r = classify(&mut rng, &s, false).unwrap();
            assert_eq!(r.commutant_dimension, r.commutant_expected, "{spec}");
            assert_eq!((r.dimension, r.matched), (want, true), "{spec}: {r:?}");
            assert!(r.soundness.max() < 1e-8 && r.reflections.max() < 1e-8, "{spec}");
        }
    }

    #[test]
    fn massless_zero_mode_is_quarantined() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = classify(&mut rng, &st("0:2,1:1", 6), true).unwrap();
        assert_eq!(r.zero_mode_quarantined, 8);
        assert_eq!((r.dimension, r.matched), (1, true), "{r:?}");
        assert!(r.soundness.max() < 1e-8, "{:?}", r.soundness);
        assert_eq!(r.affine.len(), 2);
        assert!(r.affine.iter().all(|a| a.homomorphism < 1e-10 && a.one_parameter < 1e-10));
    }

    #[test]
    fn budget() {
        let big = Arc::new(LatticeSpacetime::new(17, 4, 0.5, "1:1".parse().unwrap()).unwrap());
        assert!(matches!(build_commutant_basis(&big), Err(Error::BudgetExceeded(_))));
    }
}
