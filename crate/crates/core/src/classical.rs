//! Classical Klein–Gordon theory on a lattice spacetime.
//!
//! A [`Solution`] is stored as complex Cauchy data `(q, p)` on slice `t = 0`
//! for every species; the full spacetime solution is recovered with the
//! kick-drift-kick stepper, which is exactly symplectic for
//! σ(a, b) = Σ (q_a·p_b − q_b·p_a). The momentum is the symmetric time
//! difference p_t = (q_{t+1} − q_{t−1}) / 2dt.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpacetime;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Null direction selector: `Plus` measures (∂_t + ∂_x)φ, `Minus` (∂_t − ∂_x)φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullSign {
    Plus,
    Minus,
}

impl NullSign {
    pub fn value(self) -> f64 {
        match self {
            NullSign::Plus => 1.0,
            NullSign::Minus => -1.0,
        }
    }

    pub const BOTH: [NullSign; 2] = [NullSign::Plus, NullSign::Minus];
}

/// Cauchy data of a single species on one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub q: Vec<C64>,
    pub p: Vec<C64>,
}

impl Profile {
    pub fn zeros(n_sites: usize) -> Self {
        Self { q: vec![ZERO; n_sites], p: vec![ZERO; n_sites] }
    }

    pub fn real(q: &[f64], p: &[f64]) -> Self {
        Self {
            q: q.iter().map(|&v| C64::new(v, 0.0)).collect(),
            p: p.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.q.len()
    }

    pub fn conj(&self) -> Self {
        Self {
            q: self.q.iter().map(|z| z.conj()).collect(),
            p: self.p.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Σ_x p(x); minus the symplectic product with the constant unit solution.
    pub fn total_momentum(&self) -> C64 {
        self.p.iter().sum()
    }
}

/// Element of Sol(M): Cauchy data on slice 0 for every species.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    spacetime: Arc<LatticeSpacetime>,
    data: Vec<C64>,
}

impl Solution {
    pub fn zeros(spacetime: &Arc<LatticeSpacetime>) -> Self {
        Self { spacetime: spacetime.clone(), data: vec![ZERO; spacetime.phase_dim()] }
    }

    pub fn from_data(spacetime: &Arc<LatticeSpacetime>, data: Vec<C64>) -> Result<Self> {
        if data.len() != spacetime.phase_dim() {
            return Err(Error::DomainMismatch(format!(
                "expected {} Cauchy-data entries, got {}",
                spacetime.phase_dim(),
                data.len()
            )));
        }
        Ok(Self { spacetime: spacetime.clone(), data })
    }

    pub fn from_real(spacetime: &Arc<LatticeSpacetime>, data: &[f64]) -> Result<Self> {
        Self::from_data(spacetime, data.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// Canonical basis vector `idx` of the Cauchy-data space.
    pub fn basis(spacetime: &Arc<LatticeSpacetime>, idx: usize) -> Self {
        let mut s = Self::zeros(spacetime);
        s.data[idx] = C64::new(1.0, 0.0);
        s
    }

    /// `profile ⊗ e_species`.
    pub fn embed(spacetime: &Arc<LatticeSpacetime>, profile: &Profile, species: usize) -> Result<Self> {
        let n = spacetime.n_sites();
        if profile.n_sites() != n || species >= spacetime.species_count() {
            return Err(Error::DomainMismatch("profile does not fit the spacetime".into()));
        }
        let mut s = Self::zeros(spacetime);
        for x in 0..n {
            s.data[spacetime.index(species, 0, x)] = profile.q[x];
            s.data[spacetime.index(species, 1, x)] = profile.p[x];
        }
        Ok(s)
    }

    /// Constant unit solution `1_M` in a massless species.
    pub fn unit_constant(spacetime: &Arc<LatticeSpacetime>, species: usize) -> Result<Self> {
        let masses = spacetime.spectrum().species_masses();
        match masses.get(species) {
            Some(&m) if m == 0.0 => {}
            Some(_) => return Err(Error::NoMasslessSpecies),
            None => return Err(Error::DomainMismatch(format!("no species {species}"))),
        }
        let n = spacetime.n_sites();
        Self::embed(spacetime, &Profile::real(&vec![1.0; n], &vec![0.0; n]), species)
    }

    pub fn spacetime(&self) -> &Arc<LatticeSpacetime> {
        &self.spacetime
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn profile(&self, species: usize) -> Profile {
        let n = self.spacetime.n_sites();
        let q0 = self.spacetime.index(species, 0, 0);
        let p0 = self.spacetime.index(species, 1, 0);
        Profile { q: self.data[q0..q0 + n].to_vec(), p: self.data[p0..p0 + n].to_vec() }
    }

    pub fn q(&self, species: usize) -> &[C64] {
        let n = self.spacetime.n_sites();
        let i = self.spacetime.index(species, 0, 0);
        &self.data[i..i + n]
    }

    pub fn p(&self, species: usize) -> &[C64] {
        let n = self.spacetime.n_sites();
        let i = self.spacetime.index(species, 1, 0);
        &self.data[i..i + n]
    }

    pub fn same_space(&self, other: &Solution) -> bool {
        Arc::ptr_eq(&self.spacetime, &other.spacetime) || self.spacetime == other.spacetime
    }

    fn check(&self, other: &Solution) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SpacetimeMismatch)
        }
    }

    /// Γ: entrywise complex conjugation.
    pub fn conj(&self) -> Self {
        Self { spacetime: self.spacetime.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn add(&self, other: &Solution) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            spacetime: self.spacetime.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Solution) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            spacetime: self.spacetime.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { spacetime: self.spacetime.clone(), data: self.data.iter().map(|a| a * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Solution) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Apply a real linear map on Cauchy data.
    pub fn apply(&self, map: &DMatrix<f64>) -> Self {
        let d = self.data.len();
        let mut out = vec![ZERO; d];
        for j in 0..d {
            let v = self.data[j];
            if v == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                let m = map[(i, j)];
                if m != 0.0 {
                    *o += v * m;
                }
            }
        }
        Self { spacetime: self.spacetime.clone(), data: out }
    }

    /// Real and imaginary parts of the data as two real vectors.
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        (self.data.iter().map(|z| z.re).collect(), self.data.iter().map(|z| z.im).collect())
    }
}

/// σ(a, b) = Σ_species Σ_x (q_a p_b − q_b p_a).
pub fn symplectic_form(a: &Solution, b: &Solution) -> Result<C64> {
    a.check(b)?;
    let st = &a.spacetime;
    let n = st.n_sites();
    let mut acc = ZERO;
    for s in 0..st.species_count() {
        let (qi, pi) = (st.index(s, 0, 0), st.index(s, 1, 0));
        for x in 0..n {
            acc += a.data[qi + x] * b.data[pi + x] - b.data[qi + x] * a.data[pi + x];
        }
    }
    Ok(acc)
}

/// Matrix J of σ in the canonical basis: σ(a, b) = aᵀ J b.
pub fn symplectic_matrix(st: &LatticeSpacetime) -> DMatrix<f64> {
    let d = st.phase_dim();
    let mut j = DMatrix::zeros(d, d);
    for s in 0..st.species_count() {
        for x in 0..st.n_sites() {
            let (qi, pi) = (st.index(s, 0, x), st.index(s, 1, x));
            j[(qi, pi)] = 1.0;
            j[(pi, qi)] = -1.0;
        }
    }
    j
}

/// Compactly supported modification of the equation of motion,
/// q̈ = Δq − m²q − v q − L(w) q,
/// where `v(t, x)` shifts the squared mass and `w(t, x)` adds stiffness to the
/// link `(x, x+1)`: q·L(w)q = Σ_x w_x (q_{x+1} − q_x)². Identical across species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    n_sites: usize,
    n_steps: usize,
    mass_shift: Vec<f64>,
    stiffness: Vec<f64>,
}

impl Perturbation {
    pub fn zero(st: &LatticeSpacetime) -> Self {
        let len = st.n_sites() * st.n_steps();
        Self { n_sites: st.n_sites(), n_steps: st.n_steps(), mass_shift: vec![0.0; len], stiffness: vec![0.0; len] }
    }

    /// Mass-shift perturbation from a `(t, x)`-indexed array (`t·N + x`).
    pub fn mass_shift(st: &LatticeSpacetime, v: Vec<f64>) -> Result<Self> {
        let mut p = Self::zero(st);
        if v.len() != p.mass_shift.len() {
            return Err(Error::DomainMismatch("perturbation array has wrong length".into()));
        }
        p.mass_shift = v;
        p.validate()?;
        Ok(p)
    }

    /// Link-stiffness perturbation; entry `t·N + x` acts on link `(x, x+1)`.
    pub fn stiffness(st: &LatticeSpacetime, w: Vec<f64>) -> Result<Self> {
        let mut p = Self::zero(st);
        if w.len() != p.stiffness.len() {
            return Err(Error::DomainMismatch("perturbation array has wrong length".into()));
        }
        p.stiffness = w;
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps < 3 {
            return Err(Error::SupportViolation("need at least three slices".into()));
        }
        let n = self.n_sites;
        for t in [0, self.n_steps - 1] {
            let clean = (0..n).all(|x| self.mass_shift[t * n + x] == 0.0 && self.stiffness[t * n + x] == 0.0);
            if !clean {
                return Err(Error::SupportViolation(format!("perturbation is nonzero on boundary slice {t}")));
            }
        }
        if self.mass_shift.iter().chain(&self.stiffness).any(|v| !v.is_finite()) {
            return Err(Error::SupportViolation("non-finite perturbation".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n_sites: self.n_sites,
            n_steps: self.n_steps,
            mass_shift: self.mass_shift.iter().map(|v| v * s).collect(),
            stiffness: self.stiffness.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Perturbation) -> Self {
        Self {
            n_sites: self.n_sites,
            n_steps: self.n_steps,
            mass_shift: self.mass_shift.iter().zip(&other.mass_shift).map(|(a, b)| a + b).collect(),
            stiffness: self.stiffness.iter().zip(&other.stiffness).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mass_shift.iter().chain(&self.stiffness).all(|&v| v == 0.0)
    }

    pub fn mass_at(&self, t: usize, x: usize) -> f64 {
        self.mass_shift[t * self.n_sites + x]
    }

    pub fn stiffness_at(&self, t: usize, x: usize) -> f64 {
        self.stiffness[t * self.n_sites + x]
    }

    /// Lattice cells where the perturbation acts (links count at both ends).
    pub fn support(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut cells = std::collections::BTreeSet::new();
        for t in 0..self.n_steps {
            for x in 0..n {
                if self.mass_at(t, x) != 0.0 {
                    cells.insert((t, x));
                }
                if self.stiffness_at(t, x) != 0.0 {
                    cells.insert((t, x));
                    cells.insert((t, (x + 1) % n));
                }
            }
        }
        cells.into_iter().collect()
    }

    fn check_fits(&self, st: &LatticeSpacetime) -> Result<()> {
        if self.n_sites != st.n_sites() || self.n_steps != st.n_steps() {
            return Err(Error::SupportViolation("perturbation does not fit the spacetime".into()));
        }
        Ok(())
    }

    /// Quadratic form q·V_t q' of the perturbation on slice `t`.
    fn pairing(&self, t: usize, q: &[C64], q2: &[C64]) -> C64 {
        let n = self.n_sites;
        let mut acc = ZERO;
        for x in 0..n {
            acc += q[x] * q2[x] * self.mass_at(t, x);
            let y = (x + 1) % n;
            acc += (q[y] - q[x]) * (q2[y] - q2[x]) * self.stiffness_at(t, x);
        }
        acc
    }
}

/// Force Δq − m²q − V_t q on one species.
fn force(q: &[C64], m2: f64, pert: Option<(&Perturbation, usize)>, out: &mut [C64]) {
    let n = q.len();
    for x in 0..n {
        let l = q[(x + n - 1) % n];
        let r = q[(x + 1) % n];
        out[x] = l + r - q[x] * (2.0 + m2);
    }
    if let Some((p, t)) = pert {
        for x in 0..n {
            let v = p.mass_at(t, x);
            if v != 0.0 {
                out[x] -= q[x] * v;
            }
            let w = p.stiffness_at(t, x);
            if w != 0.0 {
                let y = (x + 1) % n;
                let flux = (q[y] - q[x]) * w;
                out[x] += flux;
                out[y] -= flux;
            }
        }
    }
}

/// Kick-drift-kick step of one species between slices `t` and `t ± 1`.
fn kdk(
    q: &mut [C64],
    p: &mut [C64],
    m2: f64,
    dt: f64,
    pert: Option<&Perturbation>,
    t: usize,
    dir: Direction,
    scratch: &mut [C64],
) {
    let h = 0.5 * dt;
    match dir {
        Direction::Forward => {
            force(q, m2, pert.map(|p| (p, t)), scratch);
            for (pi, f) in p.iter_mut().zip(scratch.iter()) {
                *pi += f * h;
            }
            for (qi, pi) in q.iter_mut().zip(p.iter()) {
                *qi += pi * dt;
            }
            force(q, m2, pert.map(|p| (p, t + 1)), scratch);
            for (pi, f) in p.iter_mut().zip(scratch.iter()) {
                *pi += f * h;
            }
        }
        Direction::Backward => {
            // exact inverse of the forward step from t − 1 to t
            force(q, m2, pert.map(|p| (p, t)), scratch);
            for (pi, f) in p.iter_mut().zip(scratch.iter()) {
                *pi -= f * h;
            }
            for (qi, pi) in q.iter_mut().zip(p.iter()) {
                *qi -= pi * dt;
            }
            force(q, m2, pert.map(|p| (p, t - 1)), scratch);
            for (pi, f) in p.iter_mut().zip(scratch.iter()) {
                *pi -= f * h;
            }
        }
    }
}

/// Cauchy data on an arbitrary slice, evolved in place.
#[derive(Debug, Clone)]
pub struct SliceState {
    spacetime: Arc<LatticeSpacetime>,
    pub t: i64,
    pub data: Vec<C64>,
}

impl SliceState {
    pub fn new(sol: &Solution) -> Self {
        Self { spacetime: sol.spacetime.clone(), t: 0, data: sol.data.clone() }
    }

    fn step_with(&mut self, dir: Direction, pert: Option<&Perturbation>) {
        let st = self.spacetime.clone();
        let n = st.n_sites();
        let masses = st.spectrum().species_masses();
        let mut scratch = vec![ZERO; n];
        let t = self.t.max(0) as usize;
        for (s, m) in masses.iter().enumerate() {
            let qi = st.index(s, 0, 0);
            let pi = st.index(s, 1, 0);
            let (head, tail) = self.data.split_at_mut(pi);
            kdk(&mut head[qi..qi + n], &mut tail[..n], m * m, st.dt(), pert, t, dir, &mut scratch);
        }
        self.t += match dir {
            Direction::Forward => 1,
            Direction::Backward => -1,
        };
    }

    pub fn step(&mut self, dir: Direction) {
        self.step_with(dir, None);
    }

    pub fn advance_to(&mut self, t: i64) {
        while self.t < t {
            self.step(Direction::Forward);
        }
        while self.t > t {
            self.step(Direction::Backward);
        }
    }

    pub fn q(&self, species: usize) -> &[C64] {
        let n = self.spacetime.n_sites();
        let i = self.spacetime.index(species, 0, 0);
        &self.data[i..i + n]
    }

    pub fn p(&self, species: usize) -> &[C64] {
        let n = self.spacetime.n_sites();
        let i = self.spacetime.index(species, 1, 0);
        &self.data[i..i + n]
    }

    pub fn into_solution(self) -> Solution {
        Solution { spacetime: self.spacetime, data: self.data }
    }
}

/// One kick-drift-kick step of the unperturbed equation, reinterpreting the
/// result as data on slice 0.
pub fn step(data: &Solution, direction: Direction) -> Solution {
    let mut s = SliceState::new(data);
    s.step(direction);
    Solution { spacetime: s.spacetime, data: s.data }
}

/// Field values `φ(t, ·)` of every species on each slice of the time window.
pub fn trajectory(sol: &Solution) -> Vec<Vec<Vec<C64>>> {
    let st = sol.spacetime.clone();
    let mut s = SliceState::new(sol);
    let mut out = Vec::with_capacity(st.n_steps());
    for t in 0..st.n_steps() as i64 {
        s.advance_to(t);
        out.push((0..st.species_count()).map(|k| s.q(k).to_vec()).collect());
    }
    out
}

/// Spacetime translation `(Tφ)(t, x) = φ(t − dt, x − dx)`.
pub fn translate(sol: &Solution, dt: i64, dx: i64) -> Solution {
    let st = sol.spacetime.clone();
    let n = st.n_sites();
    let mut s = SliceState::new(sol);
    s.advance_to(-dt);
    let mut out = vec![ZERO; s.data.len()];
    for sp in 0..st.species_count() {
        for c in 0..2 {
            for x in 0..n {
                let src = st.wrap(x as i64 - dx);
                out[st.index(sp, c, x)] = s.data[st.index(sp, c, src)];
            }
        }
    }
    Solution { spacetime: st, data: out }
}

/// Source on the lattice spacetime, indexed `(species, t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    spacetime: Arc<LatticeSpacetime>,
    values: Vec<C64>,
}

impl TestFunction {
    pub fn zeros(st: &Arc<LatticeSpacetime>) -> Self {
        Self { spacetime: st.clone(), values: vec![ZERO; st.species_count() * st.n_steps() * st.n_sites()] }
    }

    pub fn point(st: &Arc<LatticeSpacetime>, species: usize, t: usize, x: usize, value: C64) -> Result<Self> {
        let mut f = Self::zeros(st);
        f.set(species, t, x, value)?;
        Ok(f)
    }

    fn offset(&self, species: usize, t: usize, x: usize) -> usize {
        let st = &self.spacetime;
        (species * st.n_steps() + t) * st.n_sites() + x
    }

    pub fn set(&mut self, species: usize, t: usize, x: usize, value: C64) -> Result<()> {
        let st = &self.spacetime;
        if species >= st.species_count() || t >= st.n_steps() || x >= st.n_sites() {
            return Err(Error::OutOfRange { t: t as i64, x: x as i64 });
        }
        let o = self.offset(species, t, x);
        self.values[o] = value;
        Ok(())
    }

    pub fn get(&self, species: usize, t: usize, x: usize) -> C64 {
        self.values[self.offset(species, t, x)]
    }

    pub fn spacetime(&self) -> &Arc<LatticeSpacetime> {
        &self.spacetime
    }

    pub fn add(&self, other: &TestFunction) -> Self {
        Self {
            spacetime: self.spacetime.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { spacetime: self.spacetime.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn conj(&self) -> Self {
        Self { spacetime: self.spacetime.clone(), values: self.values.iter().map(|v| v.conj()).collect() }
    }

    fn slice(&self, species: usize, t: usize) -> &[C64] {
        let o = self.offset(species, t, 0);
        &self.values[o..o + self.spacetime.n_sites()]
    }

    /// Spacetime integral Σ dt·f over the species block, per species.
    pub fn integral(&self, species: usize) -> C64 {
        let st = &self.spacetime;
        (0..st.n_steps()).map(|t| self.slice(species, t).iter().sum::<C64>()).sum::<C64>() * st.dt()
    }

    /// Support must lie in slices `[1, n_steps − 2]`.
    pub fn check_support(&self) -> Result<()> {
        let st = &self.spacetime;
        if st.n_steps() < 3 {
            return Err(Error::SupportViolation("need at least three slices".into()));
        }
        for s in 0..st.species_count() {
            for t in [0, st.n_steps() - 1] {
                if self.slice(s, t).iter().any(|v| *v != ZERO) {
                    return Err(Error::SupportViolation(format!("test function nonzero on slice {t}")));
                }
            }
        }
        Ok(())
    }
}

/// Applies the discrete Klein–Gordon operator
/// (g_{t+1} − 2g_t + g_{t−1})/dt² − Δg_t + m²g_t to a spacetime function
/// supported in `[2, n_steps − 3]`; the result is a valid test function in the
/// kernel of `E`.
pub fn apply_kg_operator(g: &TestFunction) -> Result<TestFunction> {
    let st = g.spacetime.clone();
    let (n, nt) = (st.n_sites(), st.n_steps());
    if nt < 5 {
        return Err(Error::SupportViolation("need at least five slices".into()));
    }
    for s in 0..st.species_count() {
        for t in [0, 1, nt - 2, nt - 1] {
            if g.slice(s, t).iter().any(|v| *v != ZERO) {
                return Err(Error::SupportViolation(format!("g nonzero on slice {t}")));
            }
        }
    }
    let masses = st.spectrum().species_masses();
    let dt2 = st.dt() * st.dt();
    let mut f = TestFunction::zeros(&st);
    let mut fq = vec![ZERO; n];
    for (s, m) in masses.iter().enumerate() {
        for t in 1..nt - 1 {
            force(g.slice(s, t), m * m, None, &mut fq);
            for x in 0..n {
                let v = (g.get(s, t + 1, x) - g.get(s, t, x) * 2.0 + g.get(s, t - 1, x)) / dt2 - fq[x];
                let o = f.offset(s, t, x);
                f.values[o] = v;
            }
        }
    }
    Ok(f)
}

/// Retarded and advanced solutions of (□ + m²)u = f on every slice,
/// returned as `(ret, adv)` indexed `[species][t][x]`.
fn green_solutions(f: &TestFunction) -> (Vec<Vec<Vec<C64>>>, Vec<Vec<Vec<C64>>>) {
    let st = f.spacetime.clone();
    let (n, nt) = (st.n_sites(), st.n_steps());
    let dt2 = st.dt() * st.dt();
    let masses = st.spectrum().species_masses();
    let mut rets = Vec::new();
    let mut advs = Vec::new();
    let mut fq = vec![ZERO; n];
    for (s, m) in masses.iter().enumerate() {
        let mut ret = vec![vec![ZERO; n]; nt];
        for t in 1..nt - 1 {
            force(&ret[t], m * m, None, &mut fq);
            let src = f.slice(s, t);
            let next: Vec<C64> =
                (0..n).map(|x| ret[t][x] * 2.0 - ret[t - 1][x] + (fq[x] + src[x]) * dt2).collect();
            ret[t + 1] = next;
        }
        let mut adv = vec![vec![ZERO; n]; nt];
        for t in (1..nt - 1).rev() {
            force(&adv[t], m * m, None, &mut fq);
            let src = f.slice(s, t);
            let prev: Vec<C64> =
                (0..n).map(|x| adv[t][x] * 2.0 - adv[t + 1][x] + (fq[x] + src[x]) * dt2).collect();
            adv[t - 1] = prev;
        }
        rets.push(ret);
        advs.push(adv);
    }
    (rets, advs)
}

/// `E f = (retarded − advanced) f`, read off as Cauchy data on slice 0.
pub fn propagate_test_function(f: &TestFunction) -> Result<Solution> {
    f.check_support()?;
    let st = f.spacetime.clone();
    let n = st.n_sites();
    let (ret, adv) = green_solutions(f);
    let masses = st.spectrum().species_masses();
    let mut data = vec![ZERO; st.phase_dim()];
    let mut fq = vec![ZERO; n];
    for (s, m) in masses.iter().enumerate() {
        let q0: Vec<C64> = (0..n).map(|x| ret[s][0][x] - adv[s][0][x]).collect();
        let q1: Vec<C64> = (0..n).map(|x| ret[s][1][x] - adv[s][1][x]).collect();
        force(&q0, m * m, None, &mut fq);
        for x in 0..n {
            data[st.index(s, 0, x)] = q0[x];
            // p_0 from the kick-drift-kick relation q_1 = q_0 + dt (p_0 + dt/2 F(q_0))
            data[st.index(s, 1, x)] = (q1[x] - q0[x]) / st.dt() - fq[x] * (0.5 * st.dt());
        }
    }
    Ok(Solution { spacetime: st, data })
}

/// ‖(∂_t ± ∂_x)φ(t, x)‖² summed over species, with symmetric differences.
pub fn null_energy(sol: &Solution, t: i64, x: i64, sign: NullSign) -> Result<f64> {
    let st = sol.spacetime.clone();
    if t < 0 || t >= st.n_steps() as i64 || x < 0 || x >= st.n_sites() as i64 {
        return Err(Error::OutOfRange { t, x });
    }
    let mut s = SliceState::new(sol);
    s.advance_to(t);
    Ok(null_energy_on_slice(&s, x as usize, sign))
}

/// Null energy on every cell of the time window, `[t][x]`.
pub fn null_energy_density(sol: &Solution, sign: NullSign) -> Vec<Vec<f64>> {
    let st = sol.spacetime.clone();
    let mut s = SliceState::new(sol);
    (0..st.n_steps() as i64)
        .map(|t| {
            s.advance_to(t);
            (0..st.n_sites()).map(|x| null_energy_on_slice(&s, x, sign)).collect()
        })
        .collect()
}

fn null_energy_on_slice(s: &SliceState, x: usize, sign: NullSign) -> f64 {
    let n = s.spacetime.n_sites();
    let (l, r) = ((x + n - 1) % n, (x + 1) % n);
    (0..s.spacetime.species_count())
        .map(|k| {
            let q = s.q(k);
            let v = s.p(k)[x] + (q[r] - q[l]) * (0.5 * sign.value());
            v.norm_sqr()
        })
        .sum()
}

/// Relative Cauchy evolution: evolve slice-0 data forward with the perturbed
/// equation past the support of `pert`, then back to slice 0 with the free
/// equation.
pub fn relative_cauchy_evolution(sol: &Solution, pert: &Perturbation) -> Result<Solution> {
    let st = sol.spacetime.clone();
    pert.check_fits(&st)?;
    pert.validate()?;
    let last = st.n_steps() as i64 - 1;
    let mut s = SliceState::new(sol);
    while s.t < last {
        s.step_with(Direction::Forward, Some(pert));
    }
    s.advance_to(0);
    Ok(s.into_solution())
}

const RCE_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Central differences at the three step sizes, Richardson-extrapolated twice
/// (error terms h², h⁴ eliminated).
fn richardson<T, F>(mut f: F) -> Result<T>
where
    T: Clone + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    F: FnMut(f64) -> Result<T>,
{
    let mut d = Vec::with_capacity(3);
    for h in RCE_STEPS {
        let plus = f(h)?;
        let minus = f(-h)?;
        d.push((plus - minus) * (0.5 / h));
    }
    let r1 = (d[1].clone() * 4.0 - d[0].clone()) * (1.0 / 3.0);
    let r2 = (d[2].clone() * 4.0 - d[1].clone()) * (1.0 / 3.0);
    Ok((r2 * 16.0 - r1) * (1.0 / 15.0))
}

/// d/ds σ(rce[s·pert] a, b) at s = 0.
pub fn rce_derivative(pert: &Perturbation, a: &Solution, b: &Solution) -> Result<C64> {
    a.check(b)?;
    richardson(|s| symplectic_form(&relative_cauchy_evolution(a, &pert.scaled(s))?, b))
}

#[derive(Clone)]
struct DataVec(Vec<C64>);

impl std::ops::Sub for DataVec {
    type Output = DataVec;
    fn sub(self, o: DataVec) -> DataVec {
        DataVec(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Add for DataVec {
    type Output = DataVec;
    fn add(self, o: DataVec) -> DataVec {
        DataVec(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl std::ops::Mul<f64> for DataVec {
    type Output = DataVec;
    fn mul(self, c: f64) -> DataVec {
        DataVec(self.0.iter().map(|a| a * c).collect())
    }
}

/// F[pert] a = d/ds rce[s·pert] a at s = 0, by the same Richardson scheme.
pub fn rce_generator(pert: &Perturbation, a: &Solution) -> Result<Solution> {
    let v = richardson(|s| Ok(DataVec(relative_cauchy_evolution(a, &pert.scaled(s))?.data)))?;
    Ok(Solution { spacetime: a.spacetime.clone(), data: v.0 })
}

/// Lattice stress-energy pairing dt·Σ_t Σ_species φ_t·V_t φ'_t, the closed form
/// of σ(F[pert]φ, φ').
pub fn perturbation_pairing(pert: &Perturbation, a: &Solution, b: &Solution) -> Result<C64> {
    a.check(b)?;
    let st = a.spacetime.clone();
    pert.check_fits(&st)?;
    let mut sa = SliceState::new(a);
    let mut sb = SliceState::new(b);
    let mut acc = ZERO;
    for t in 0..st.n_steps() {
        sa.advance_to(t as i64);
        sb.advance_to(t as i64);
        for k in 0..st.species_count() {
            acc += pert.pairing(t, sa.q(k), sb.q(k));
        }
    }
    Ok(acc * st.dt())
}

/// Real matrix of a linear map on Cauchy data, built column by column.
pub fn matrix_of<F>(st: &Arc<LatticeSpacetime>, mut f: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&Solution) -> Result<Solution>,
{
    let d = st.phase_dim();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = f(&Solution::basis(st, j))?;
        for i in 0..d {
            m[(i, j)] = col.data[i].re;
        }
    }
    Ok(m)
}

/// One forward step of the free evolution as a matrix.
pub fn one_step_matrix(st: &Arc<LatticeSpacetime>) -> DMatrix<f64> {
    matrix_of(st, |s| Ok(step(s, Direction::Forward))).expect("stepping cannot fail")
}

/// Translation `(dt, dx)` as a matrix.
pub fn translation_matrix(st: &Arc<LatticeSpacetime>, dt: i64, dx: i64) -> DMatrix<f64> {
    matrix_of(st, |s| Ok(translate(s, dt, dx))).expect("translation cannot fail")
}

pub fn rce_matrix(st: &Arc<LatticeSpacetime>, pert: &Perturbation) -> Result<DMatrix<f64>> {
    matrix_of(st, |s| relative_cauchy_evolution(s, pert))
}

/// JSON fixture for Cauchy data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFixture {
    pub spectrum: crate::lattice::MassSpectrum,
    pub n_sites: usize,
    /// `[species][site]`, each entry `[re, im]`.
    pub q: Vec<Vec<[f64; 2]>>,
    pub p: Vec<Vec<[f64; 2]>>,
}

impl SolutionFixture {
    pub fn from_solution(sol: &Solution) -> Self {
        let st = sol.spacetime();
        let pack = |v: &[C64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
        Self {
            spectrum: st.spectrum().clone(),
            n_sites: st.n_sites(),
            q: (0..st.species_count()).map(|s| pack(sol.q(s))).collect(),
            p: (0..st.species_count()).map(|s| pack(sol.p(s))).collect(),
        }
    }

    pub fn to_solution(&self, st: &Arc<LatticeSpacetime>) -> Result<Solution> {
        if self.n_sites != st.n_sites() || &self.spectrum != st.spectrum() {
            return Err(Error::SpacetimeMismatch);
        }
        let mut sol = Solution::zeros(st);
        if self.q.len() != st.species_count() || self.p.len() != st.species_count() {
            return Err(Error::Json("species count mismatch".into()));
        }
        for s in 0..st.species_count() {
            if self.q[s].len() != self.n_sites || self.p[s].len() != self.n_sites {
                return Err(Error::Json("site count mismatch".into()));
            }
            for x in 0..self.n_sites {
                sol.data[st.index(s, 0, x)] = C64::new(self.q[s][x][0], self.q[s][x][1]);
                sol.data[st.index(s, 1, x)] = C64::new(self.p[s][x][0], self.p[s][x][1]);
            }
        }
        Ok(sol)
    }
}
