//! Quasifree (Gaussian) states on the polynomial CCR algebra.
//!
//! A state is fixed by its two-point kernel W = S + (i/2)σ with S real
//! symmetric. Symmetric monomials are Weyl ordered, so the state evaluates
//! them by the hafnian of S over the multiset of indices; the antisymmetric
//! part of W only enters through the product.
//!
//! The vacuum is built mode by mode from the invariant quadratic form of the
//! kick-drift-kick map, Ω² = λ(1 − dt²λ/4) with λ = m² + 4 sin²(πk/N), which
//! makes it exactly invariant under lattice time steps.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ccr::{AlgebraElement, AlgebraMap, PhaseSpace};
use crate::classical::{symplectic_matrix, Solution, C64};
use crate::error::{Error, Result};
use crate::lattice::{mode_eigenvalue, LatticeSpacetime};

pub const DEFAULT_DEGREE_CAP: usize = 8;

/// Invariant frequency of mode `k` for the one-step map.
pub fn invariant_frequency(mass: f64, k: usize, n_sites: usize, dt: f64) -> f64 {
    let lambda = mode_eigenvalue(mass, k, n_sites);
    (lambda * (1.0 - 0.25 * dt * dt * lambda)).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasifreeState {
    space: PhaseSpace,
    sym: DMatrix<f64>,
    sigma: DMatrix<f64>,
    degree_cap: usize,
    /// Species whose zero mode carries the reference Gaussian instead of a
    /// ground state.
    reference_modes: Vec<usize>,
}

impl QuasifreeState {
    /// Lattice vacuum. Massless zero modes have no ground state on the circle
    /// and get a unit-width reference Gaussian; they are listed in
    /// [`QuasifreeState::reference_modes`].
    pub fn vacuum(st: &LatticeSpacetime) -> Self {
        let n = st.n_sites();
        let d = st.phase_dim();
        let mut sym = DMatrix::zeros(d, d);
        let mut reference_modes = Vec::new();
        for (s, m) in st.spectrum().species_masses().iter().enumerate() {
            let omegas: Vec<f64> = (0..n)
                .map(|k| {
                    let w = invariant_frequency(*m, k, n, st.dt());
                    if w > 0.0 {
                        w
                    } else {
                        1.0
                    }
                })
                .collect();
            if invariant_frequency(*m, 0, n, st.dt()) == 0.0 {
                reference_modes.push(s);
            }
            for x in 0..n {
                for y in 0..n {
                    let (mut qq, mut pp) = (0.0, 0.0);
                    for (k, w) in omegas.iter().enumerate() {
                        let c = (2.0 * PI * (k * (x + n - y)) as f64 / n as f64).cos();
                        // the q-basis vector smears the momentum operator and
                        // vice versa, so the blocks are ⟨π π⟩ and ⟨φ φ⟩
                        qq += c * w / 2.0;
                        pp += c / (2.0 * w);
                    }
                    sym[(st.index(s, 0, x), st.index(s, 0, y))] = qq / n as f64;
                    sym[(st.index(s, 1, x), st.index(s, 1, y))] = pp / n as f64;
                }
            }
        }
        Self { space: PhaseSpace::of(st), sym, sigma: symplectic_matrix(st), degree_cap: DEFAULT_DEGREE_CAP, reference_modes }
    }

    /// State from an explicit symmetric kernel.
    pub fn from_symmetric(st: &LatticeSpacetime, sym: DMatrix<f64>) -> Result<Self> {
        let d = st.phase_dim();
        if sym.shape() != (d, d) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { space: PhaseSpace::of(st), sym, sigma: symplectic_matrix(st), degree_cap: DEFAULT_DEGREE_CAP, reference_modes: vec![] })
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    pub fn space(&self) -> PhaseSpace {
        self.space
    }

    pub fn symmetric_part(&self) -> &DMatrix<f64> {
        &self.sym
    }

    pub fn reference_modes(&self) -> &[usize] {
        &self.reference_modes
    }

    /// Translation phase invariance fails on reference zero modes.
    pub fn is_time_invariant(&self) -> bool {
        self.reference_modes.is_empty()
    }

    /// W(i, j) on canonical basis vectors.
    pub fn kernel(&self, i: usize, j: usize) -> C64 {
        C64::new(self.sym[(i, j)], 0.5 * self.sigma[(i, j)])
    }

    /// W(φ, φ′) = ω(Φ(φ)Φ(φ′)), bilinear.
    pub fn two_point(&self, a: &Solution, b: &Solution) -> C64 {
        let d = self.space.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            let ai = a.data()[i];
            if ai.norm() == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = self.kernel(i, j);
                if w.norm() != 0.0 {
                    acc += ai * w * b.data()[j];
                }
            }
        }
        acc
    }

    pub fn evaluate(&self, a: &AlgebraElement) -> Result<C64> {
        if a.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let deg = a.degree();
        if deg > self.degree_cap as i64 {
            return Err(Error::DegreeCapExceeded { degree: deg as usize, cap: self.degree_cap });
        }
        let mut acc = C64::new(0.0, 0.0);
        for (m, c) in a.terms() {
            acc += c * self.hafnian(m);
        }
        Ok(acc)
    }

    /// Sum over perfect matchings of Π S(i, j).
    fn hafnian(&self, idx: &[u32]) -> f64 {
        if idx.len() % 2 == 1 {
            return 0.0;
        }
        if idx.is_empty() {
            return 1.0;
        }
        let first = idx[0] as usize;
        let mut acc = 0.0;
        for k in 1..idx.len() {
            let s = self.sym[(first, idx[k] as usize)];
            if s == 0.0 {
                continue;
            }
            let rest: Vec<u32> = idx[1..].iter().enumerate().filter(|(j, _)| j + 1 != k).map(|(_, &v)| v).collect();
            acc += s * self.hafnian(&rest);
        }
        acc
    }

    /// Functional a ↦ ω(η(a)).
    pub fn pull_back(&self, map: &AlgebraMap) -> Result<PulledBack<'_>> {
        if map.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(PulledBack { state: self, map: map.clone() })
    }

    pub fn to_json(&self) -> KernelJson {
        let d = self.space.dim;
        KernelJson {
            dim: d,
            re: (0..d).map(|i| (0..d).map(|j| self.sym[(i, j)]).collect()).collect(),
            im: (0..d).map(|i| (0..d).map(|j| 0.5 * self.sigma[(i, j)]).collect()).collect(),
        }
    }
}

/// A state pulled back along an algebra map.
#[derive(Debug, Clone)]
pub struct PulledBack<'a> {
    state: &'a QuasifreeState,
    map: AlgebraMap,
}

impl PulledBack<'_> {
    pub fn evaluate(&self, a: &AlgebraElement) -> Result<C64> {
        self.state.evaluate(&self.map.apply(a)?)
    }
}

/// Two-point kernel as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// ω(Φ(e_{i1})⋯Φ(e_{ik})) for an ordered word by the recursive Wick formula,
/// contracting the first factor with each later one using the full kernel W.
pub fn wick_word(state: &QuasifreeState, word: &[usize]) -> C64 {
    if word.len() % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    if word.is_empty() {
        return C64::new(1.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for k in 1..word.len() {
        let w = state.kernel(word[0], word[k]);
        if w.norm() == 0.0 {
            continue;
        }
        let rest: Vec<usize> = word[1..].iter().enumerate().filter(|(j, _)| j + 1 != k).map(|(_, &v)| v).collect();
        acc += w * wick_word(state, &rest);
    }
    acc
}
