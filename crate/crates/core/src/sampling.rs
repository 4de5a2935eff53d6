//! Seeded random generators for test data.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ccr::{oracle::QComplex, AlgebraElement, PhaseSpace};
use crate::classical::{Perturbation, Solution, C64};
use crate::lattice::LatticeSpacetime;

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn real_solution<R: Rng + ?Sized>(rng: &mut R, st: &Arc<LatticeSpacetime>) -> Solution {
    let data: Vec<f64> = (0..st.phase_dim()).map(|_| normal(rng)).collect();
    Solution::from_real(st, &data).expect("dimension matches")
}

pub fn complex_solution<R: Rng + ?Sized>(rng: &mut R, st: &Arc<LatticeSpacetime>) -> Solution {
    let data: Vec<C64> = (0..st.phase_dim()).map(|_| C64::new(normal(rng), normal(rng))).collect();
    Solution::from_data(st, data).expect("dimension matches")
}

/// Sparse element: `n_terms` monomials of degree ≤ `max_degree` with Gaussian
/// complex coefficients.
pub fn element<R: Rng + ?Sized>(rng: &mut R, space: PhaseSpace, max_degree: usize, n_terms: usize) -> AlgebraElement {
    let mut e = AlgebraElement::zero(space);
    for _ in 0..n_terms {
        let deg = rng.random_range(0..=max_degree);
        let idx: Vec<u32> = (0..deg).map(|_| rng.random_range(0..space.dim as u32)).collect();
        let c = C64::new(normal(rng), normal(rng));
        e = e.add(&AlgebraElement::monomial(space, &idx, c).expect("indices in range")).expect("same space");
    }
    e
}

/// Sparse element with small Gaussian-integer coefficients, returned both as a
/// floating-point element and as exact data. Indices are drawn from `pool` so
/// that contractions actually occur.
pub fn integer_element<R: Rng + ?Sized>(
    rng: &mut R,
    space: PhaseSpace,
    pool: &[u32],
    max_degree: usize,
    n_terms: usize,
) -> (AlgebraElement, Vec<(Vec<u32>, QComplex)>) {
    let mut e = AlgebraElement::zero(space);
    let mut exact = Vec::new();
    for _ in 0..n_terms {
        let deg = rng.random_range(0..=max_degree);
        let idx: Vec<u32> = (0..deg).map(|_| pool[rng.random_range(0..pool.len())]).collect();
        let (re, im) = (rng.random_range(-3i64..=3), rng.random_range(-3i64..=3));
        e = e
            .add(&AlgebraElement::monomial(space, &idx, C64::new(re as f64, im as f64)).expect("indices in range"))
            .expect("same space");
        exact.push((idx, QComplex::int(re, im)));
    }
    (e, exact)
}

/// Indices of a few neighbouring sites, both components, of species 0 and 1
/// (if present): small enough that random monomials share partners.
pub fn contraction_pool(st: &LatticeSpacetime) -> Vec<u32> {
    let mut pool = Vec::new();
    for s in 0..st.species_count().min(2) {
        for c in 0..2 {
            for x in 0..2 {
                pool.push(st.index(s, c, x) as u32);
            }
        }
    }
    pool
}

/// Smooth bump perturbation centred at `(t0, x0)`, mass shift if
/// `stiffness == false`, link stiffness otherwise.
pub fn bump_perturbation(
    st: &LatticeSpacetime,
    t0: usize,
    x0: usize,
    radius: usize,
    amplitude: f64,
    stiffness: bool,
) -> Perturbation {
    let (n, nt) = (st.n_sites(), st.n_steps());
    let mut v = vec![0.0; n * nt];
    for t in 1..nt - 1 {
        for x in 0..n {
            let dx = {
                let d = (x as i64 - x0 as i64).rem_euclid(n as i64);
                d.min(n as i64 - d) as usize
            };
            let dt = t.abs_diff(t0);
            if dt <= radius && dx <= radius {
                let r2 = ((dt * dt + dx * dx) as f64) / ((radius + 1) * (radius + 1)) as f64;
                v[t * n + x] = amplitude * (1.0 - r2).max(0.0);
            }
        }
    }
    if stiffness {
        Perturbation::stiffness(st, v).expect("support is interior")
    } else {
        Perturbation::mass_shift(st, v).expect("support is interior")
    }
}

/// Perturbation with random amplitudes on a random interior patch.
pub fn random_perturbation<R: Rng + ?Sized>(rng: &mut R, st: &LatticeSpacetime, stiffness: bool) -> Perturbation {
    let (n, nt) = (st.n_sites(), st.n_steps());
    let t0 = rng.random_range(1..nt - 1);
    let x0 = rng.random_range(0..n);
    let mut v = vec![0.0; n * nt];
    for t in t0.saturating_sub(1).max(1)..(t0 + 2).min(nt - 1) {
        for dx in 0..3 {
            v[t * n + (x0 + dx) % n] = 0.3 * normal(rng);
        }
    }
    if stiffness {
        Perturbation::stiffness(st, v).expect("support is interior")
    } else {
        Perturbation::mass_shift(st, v).expect("support is interior")
    }
}

/// Haar-distributed element of O(k): QR of a Gaussian matrix with the sign of
/// R's diagonal absorbed; determinant ±1 with equal probability.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, k: usize) -> DMatrix<f64> {
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(k, k, |_, _| normal(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
