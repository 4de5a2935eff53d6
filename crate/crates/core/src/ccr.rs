//! Polynomial CCR algebra over the Cauchy-data space.
//!
//! An element is a finite sum of symmetric monomials `e_{i1} ⊙ ⋯ ⊙ e_{ik}` in
//! the canonical real basis, stored as sorted index lists. Identifying a
//! symmetric tensor with the polynomial it induces, ⊙ is the commutative
//! product and the deformed product is the Moyal product
//!
//! a·b = Σ_r (i/2)^r / r! · Pʳ(a, b),  P = Σ_{ij} σ_ij ∂_i ⊗ ∂_j.
//!
//! Because σ pairs each basis vector with exactly one partner, Pʳ is evaluated
//! by repeatedly contracting one index of each factor.

pub mod oracle;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::classical::{Solution, C64};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpacetime;

/// Sorted multi-index of a symmetric monomial.
pub type Multi = SmallVec<[u32; 6]>;

/// Coefficients with modulus below this are dropped.
pub const PRUNE: f64 = 1e-15;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// The symplectic vector space underlying an algebra: `2·species·n_sites`
/// canonical basis vectors, with e_{(s,q,x)} paired to e_{(s,p,x)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseSpace {
    pub dim: usize,
    pub n_sites: usize,
}

impl PhaseSpace {
    pub fn of(st: &LatticeSpacetime) -> Self {
        Self { dim: st.phase_dim(), n_sites: st.n_sites() }
    }

    /// Symplectic partner of basis index `i` and σ(e_i, e_partner).
    #[inline]
    pub fn partner(&self, i: u32) -> (u32, f64) {
        let n = self.n_sites as u32;
        if (i / n) % 2 == 0 {
            (i + n, 1.0)
        } else {
            (i - n, -1.0)
        }
    }

    /// σ(e_i, e_j).
    pub fn sigma(&self, i: u32, j: u32) -> f64 {
        let (k, s) = self.partner(i);
        if k == j {
            s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    space: PhaseSpace,
    terms: BTreeMap<Multi, C64>,
}

fn merge(a: &[u32], b: &[u32]) -> Multi {
    let mut out: Multi = SmallVec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Distinct indices with multiplicities.
fn runs(m: &[u32]) -> SmallVec<[(u32, usize, usize); 6]> {
    let mut out: SmallVec<[(u32, usize, usize); 6]> = SmallVec::new();
    let mut k = 0;
    while k < m.len() {
        let start = k;
        while k < m.len() && m[k] == m[start] {
            k += 1;
        }
        out.push((m[start], start, k - start));
    }
    out
}

fn remove_at(m: &[u32], pos: usize) -> Multi {
    let mut out: Multi = SmallVec::from_slice(m);
    out.remove(pos);
    out
}

fn accumulate(map: &mut BTreeMap<Multi, C64>, key: Multi, c: C64) {
    *map.entry(key).or_insert(ZERO) += c;
}

impl AlgebraElement {
    pub fn zero(space: PhaseSpace) -> Self {
        Self { space, terms: BTreeMap::new() }
    }

    pub fn unit(space: PhaseSpace) -> Self {
        Self::constant(space, ONE)
    }

    pub fn constant(space: PhaseSpace, c: C64) -> Self {
        let mut e = Self::zero(space);
        e.add_term(SmallVec::new(), c);
        e.prune();
        e
    }

    /// Monomial `c · e_{i1} ⊙ ⋯ ⊙ e_{ik}`; indices in any order.
    pub fn monomial(space: PhaseSpace, idx: &[u32], c: C64) -> Result<Self> {
        if idx.iter().any(|&i| i as usize >= space.dim) {
            return Err(Error::SpaceMismatch);
        }
        let mut m: Multi = SmallVec::from_slice(idx);
        m.sort_unstable();
        let mut e = Self::zero(space);
        e.add_term(m, c);
        e.prune();
        Ok(e)
    }

    /// Φ(φ) = Σ_i φ_i e_i.
    pub fn field(phi: &Solution) -> Self {
        let space = PhaseSpace::of(phi.spacetime());
        let mut e = Self::zero(space);
        for (i, &c) in phi.data().iter().enumerate() {
            if c.norm() > PRUNE {
                e.terms.insert(SmallVec::from_slice(&[i as u32]), c);
            }
        }
        e
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn terms(&self) -> &BTreeMap<Multi, C64> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, idx: &[u32]) -> C64 {
        let mut m: Multi = SmallVec::from_slice(idx);
        m.sort_unstable();
        self.terms.get(&m).copied().unwrap_or(ZERO)
    }

    /// Highest stored monomial degree; −1 for the zero element.
    pub fn degree(&self) -> i64 {
        self.terms.keys().map(|k| k.len() as i64).max().unwrap_or(-1)
    }

    /// Homogeneous component of degree `n`.
    pub fn part(&self, n: usize) -> Self {
        Self {
            space: self.space,
            terms: self.terms.iter().filter(|(k, _)| k.len() == n).map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }

    fn add_term(&mut self, m: Multi, c: C64) {
        accumulate(&mut self.terms, m, c);
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| v.norm() >= PRUNE);
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), *v);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self { space: self.space, terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect() };
        out.prune();
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient modulus of `self − other`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check(other)?;
        let mut d: f64 = 0.0;
        for (k, v) in &self.terms {
            d = d.max((v - other.terms.get(k).copied().unwrap_or(ZERO)).norm());
        }
        for (k, v) in &other.terms {
            if !self.terms.contains_key(k) {
                d = d.max(v.norm());
            }
        }
        Ok(d)
    }

    /// Commutative product ⊙.
    pub fn sym_product(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = Self::zero(self.space);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(merge(a, b), ca * cb);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Deformed (CCR) product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                moyal_monomials(self.space, a, b, ca * cb, &mut out);
            }
        }
        let mut e = Self { space: self.space, terms: out };
        e.prune();
        Ok(e)
    }

    /// Antilinear involution; the canonical basis is real, so only
    /// coefficients are conjugated.
    pub fn star(&self) -> Self {
        Self { space: self.space, terms: self.terms.iter().map(|(k, v)| (k.clone(), v.conj())).collect() }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.product(other)?.sub(&other.product(self)?)
    }

    /// Directional derivative Σ_i c_i ∂_i; the generator of the affine
    /// substitution e_i ↦ e_i + λ c_i.
    pub fn derivative(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.space.dim {
            return Err(Error::SpaceMismatch);
        }
        let mut out = Self::zero(self.space);
        for (m, v) in &self.terms {
            for (idx, pos, mult) in runs(m) {
                let ci = c[idx as usize];
                if ci != 0.0 {
                    out.add_term(remove_at(m, pos), v * (ci * mult as f64));
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Sorted basis indices that occur in any monomial.
    pub fn support(&self) -> std::collections::BTreeSet<u32> {
        self.terms.keys().flat_map(|k| k.iter().copied()).collect()
    }

    pub fn to_json(&self) -> Vec<TermJson> {
        self.terms.iter().map(|(k, v)| TermJson { idx: k.to_vec(), re: v.re, im: v.im }).collect()
    }

    pub fn from_json(space: PhaseSpace, terms: &[TermJson]) -> Result<Self> {
        let mut e = Self::zero(space);
        for t in terms {
            e = e.add(&Self::monomial(space, &t.idx, C64::new(t.re, t.im))?)?;
        }
        Ok(e)
    }
}

/// Accumulate `c · x^a ⋆ x^b` into `out`.
fn moyal_monomials(space: PhaseSpace, a: &[u32], b: &[u32], c: C64, out: &mut BTreeMap<Multi, C64>) {
    accumulate(out, merge(a, b), c);
    let mut layer: BTreeMap<(Multi, Multi), f64> = BTreeMap::new();
    layer.insert((SmallVec::from_slice(a), SmallVec::from_slice(b)), 1.0);
    let mut prefactor = ONE;
    let mut r = 0;
    while !layer.is_empty() {
        r += 1;
        prefactor *= C64::new(0.0, 0.5 / r as f64);
        let mut next: BTreeMap<(Multi, Multi), f64> = BTreeMap::new();
        for ((aa, bb), w) in &layer {
            for (i, pos_a, mult_a) in runs(aa) {
                let (j, s) = space.partner(i);
                if let Ok(pos_b) = bb.binary_search(&j) {
                    let mut start = pos_b;
                    while start > 0 && bb[start - 1] == j {
                        start -= 1;
                    }
                    let mult_b = bb[start..].iter().take_while(|&&v| v == j).count();
                    let key = (remove_at(aa, pos_a), remove_at(bb, start));
                    *next.entry(key).or_insert(0.0) += w * s * (mult_a * mult_b) as f64;
                }
            }
        }
        next.retain(|_, w| *w != 0.0);
        for ((aa, bb), w) in &next {
            accumulate(out, merge(aa, bb), c * prefactor * *w);
        }
        layer = next;
    }
}

/// Unital algebra map determined on generators by
/// e_i ↦ Φ(L e_i) + shift_i · 𝟙,
/// i.e. an affine substitution in the polynomial picture. It is a
/// homomorphism of the deformed product when `L` is symplectic.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraMap {
    space: PhaseSpace,
    linear: DMatrix<f64>,
    shift: Vec<f64>,
}

impl AlgebraMap {
    pub fn identity(space: PhaseSpace) -> Self {
        Self { space, linear: DMatrix::identity(space.dim, space.dim), shift: vec![0.0; space.dim] }
    }

    /// Unchecked affine map; callers are responsible for σ-compatibility.
    pub fn affine(space: PhaseSpace, linear: DMatrix<f64>, shift: Vec<f64>) -> Result<Self> {
        if linear.shape() != (space.dim, space.dim) || shift.len() != space.dim {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space, linear, shift })
    }

    /// Γ_⊙ of a real-linear symplectic map of the Cauchy-data space.
    /// A real matrix commutes with Γ automatically, so the conjugation check
    /// is performed by [`lift_complex`] only.
    pub fn lift(st: &LatticeSpacetime, map: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let space = PhaseSpace::of(st);
        if map.shape() != (space.dim, space.dim) {
            return Err(Error::SpaceMismatch);
        }
        let j = crate::classical::symplectic_matrix(st);
        let resid = crate::linalg::max_abs(&(map.transpose() * &j * map - &j));
        if resid > tol {
            return Err(Error::NotSymplectic(resid));
        }
        Ok(Self { space, linear: map.clone(), shift: vec![0.0; space.dim] })
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Image of the generator e_i as an affine polynomial.
    fn generator_image(&self, i: usize) -> Vec<(Option<u32>, f64)> {
        let mut out = Vec::new();
        if self.shift[i] != 0.0 {
            out.push((None, self.shift[i]));
        }
        for (r, &v) in self.linear.column(i).iter().enumerate() {
            if v != 0.0 {
                out.push((Some(r as u32), v));
            }
        }
        out
    }

    pub fn apply(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        if a.space != self.space {
            return Err(Error::SpaceMismatch);
        }
        let images: BTreeMap<u32, Vec<(Option<u32>, f64)>> =
            a.support().into_iter().map(|i| (i, self.generator_image(i as usize))).collect();
        let mut out = BTreeMap::new();
        for (m, c) in &a.terms {
            let mut partial: BTreeMap<Multi, f64> = BTreeMap::new();
            partial.insert(SmallVec::new(), 1.0);
            for i in m {
                let mut next: BTreeMap<Multi, f64> = BTreeMap::new();
                for (k, w) in &partial {
                    for (idx, v) in &images[i] {
                        let key = match idx {
                            None => k.clone(),
                            Some(j) => merge(k, &[*j]),
                        };
                        *next.entry(key).or_insert(0.0) += w * v;
                    }
                }
                partial = next;
            }
            for (k, w) in partial {
                accumulate(&mut out, k, c * w);
            }
        }
        let mut e = AlgebraElement { space: self.space, terms: out };
        e.prune();
        Ok(e)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AlgebraMap) -> Result<AlgebraMap> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        // (self∘other)(e_i) = self(L' e_i + c'_i) = L L' e_i + (c'_i + Σ_j L'_ji c_j)
        let linear = &self.linear * &other.linear;
        let shift = (0..self.space.dim)
            .map(|i| other.shift[i] + (0..self.space.dim).map(|j| other.linear[(j, i)] * self.shift[j]).sum::<f64>())
            .collect();
        Ok(AlgebraMap { space: self.space, linear, shift })
    }

    /// Max deviation from another map, entrywise.
    pub fn distance(&self, other: &AlgebraMap) -> f64 {
        let l = crate::linalg::max_abs(&(&self.linear - &other.linear));
        let s = self.shift.iter().zip(&other.shift).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        l.max(s)
    }
}

/// Lift of a complex linear map of Cauchy data, given by its real and
/// imaginary parts. Fails with `NotReal` unless the imaginary part vanishes,
/// i.e. unless the map commutes with Γ.
pub fn lift_complex(st: &LatticeSpacetime, re: &DMatrix<f64>, im: &DMatrix<f64>, tol: f64) -> Result<AlgebraMap> {
    let resid = crate::linalg::max_abs(im);
    if resid > tol {
        return Err(Error::NotReal(resid));
    }
    AlgebraMap::lift(st, re, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub idx: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn setup() -> (Arc<LatticeSpacetime>, PhaseSpace) {
        let st = Arc::new(LatticeSpacetime::new(4, 6, 0.5, "1:1".parse().unwrap()).unwrap());
        let sp = PhaseSpace::of(&st);
        (st, sp)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn partner_structure() {
        let (_, sp) = setup();
        assert_eq!(sp.partner(1), (5, 1.0));
        assert_eq!(sp.partner(5), (1, -1.0));
        assert_eq!(sp.sigma(1, 5), 1.0);
        assert_eq!(sp.sigma(1, 2), 0.0);
    }

    #[test]
    fn field_product_has_central_term() {
        let (st, sp) = setup();
        let q = AlgebraElement::field(&Solution::basis(&st, 2));
        let p = AlgebraElement::field(&Solution::basis(&st, 6));
        let qp = q.product(&p).unwrap();
        assert_eq!(qp.coefficient(&[2, 6]), c(1.0, 0.0));
        assert_eq!(qp.coefficient(&[]), c(0.0, 0.5));
        let comm = q.commutator(&p).unwrap();
        assert_eq!(comm, AlgebraElement::constant(sp, c(0.0, 1.0)));
    }

    #[test]
    fn square_times_square() {
        // x_q² ⋆ x_p² = x_q²x_p² + 2i x_q x_p − 1/2
        let (_, sp) = setup();
        let a = AlgebraElement::monomial(sp, &[0, 0], c(1.0, 0.0)).unwrap();
        let b = AlgebraElement::monomial(sp, &[4, 4], c(1.0, 0.0)).unwrap();
        let ab = a.product(&b).unwrap();
        assert_eq!(ab.len(), 3);
        assert_eq!(ab.coefficient(&[0, 0, 4, 4]), c(1.0, 0.0));
        assert_eq!(ab.coefficient(&[0, 4]), c(0.0, 2.0));
        assert_eq!(ab.coefficient(&[]), c(-0.5, 0.0));
    }

    #[test]
    fn degree_conventions() {
        let (_, sp) = setup();
        assert_eq!(AlgebraElement::zero(sp).degree(), -1);
        assert_eq!(AlgebraElement::unit(sp).degree(), 0);
        assert_eq!(AlgebraElement::constant(sp, c(1e-16, 0.0)).degree(), -1);
        assert!(AlgebraElement::monomial(sp, &[9], ONE).is_err());
    }

    #[test]
    fn affine_map_shifts_fields() {
        let (st, sp) = setup();
        let mut shift = vec![0.0; sp.dim];
        shift[4] = 2.0;
        let map = AlgebraMap::affine(sp, DMatrix::identity(sp.dim, sp.dim), shift).unwrap();
        let p = AlgebraElement::field(&Solution::basis(&st, 4));
        let image = map.apply(&p.product(&p).unwrap()).unwrap();
        assert_eq!(image.coefficient(&[4, 4]), ONE);
        assert_eq!(image.coefficient(&[4]), c(4.0, 0.0));
        assert_eq!(image.coefficient(&[]), c(4.0, 0.0));
    }

    #[test]
    fn lift_rejects_non_symplectic() {
        let (st, sp) = setup();
        let m = DMatrix::identity(sp.dim, sp.dim) * 2.0;
        assert!(matches!(AlgebraMap::lift(&st, &m, 1e-10), Err(Error::NotSymplectic(_))));
        let im = DMatrix::identity(sp.dim, sp.dim) * 0.1;
        assert!(matches!(
            lift_complex(&st, &DMatrix::identity(sp.dim, sp.dim), &im, 1e-10),
            Err(Error::NotReal(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let (_, sp) = setup();
        let a = AlgebraElement::monomial(sp, &[3, 1, 1], c(0.25, -2.0))
            .unwrap()
            .add(&AlgebraElement::unit(sp))
            .unwrap();
        let json = serde_json::to_string(&a.to_json()).unwrap();
        assert_eq!(json, r#"[{"idx":[],"re":1.0,"im":0.0},{"idx":[1,1,3],"re":0.25,"im":-2.0}]"#);
        let terms: Vec<TermJson> = serde_json::from_str(&json).unwrap();
        assert_eq!(AlgebraElement::from_json(sp, &terms).unwrap(), a);
    }
}
