//! Dense helpers (nalgebra storage, faer decompositions): nullspaces, matrix exponential,
//! subspace comparison and incremental row compression.

use faer::Mat;
use nalgebra::DMatrix;

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Full SVD `(U, s, V)` with singular values in decreasing order.
pub fn svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return (DMatrix::identity(m, m), vec![], DMatrix::identity(n, n));
    }
    let f = to_faer(a).svd().expect("SVD converges");
    let (u, s, v) = (f.U(), f.S(), f.V());
    let k = m.min(n);
    (
        DMatrix::from_fn(m, m, |i, j| u[(i, j)]),
        (0..k).map(|i| s[i]).collect(),
        DMatrix::from_fn(n, n, |i, j| v[(i, j)]),
    )
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return vec![];
    }
    let s = to_faer(a).singular_values().expect("SVD converges");
    s.to_vec()
}

/// Orthonormal basis (as columns) of the nullspace of `a`, using singular
/// values below `rel_tol · σ_max`. Returns the basis and the largest singular
/// value.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, f64) {
    let n = a.ncols();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0.0);
    }
    if a.nrows() == 0 {
        return (DMatrix::identity(n, n), 0.0);
    }
    let (_, s, v) = svd(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = rel_tol * smax;
    let r = s.iter().filter(|&&x| x > cut && x > 0.0).count();
    (v.columns(r, n - r).into_owned(), smax)
}

/// Numerical rank with the same relative threshold as [`nullspace`].
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > rel_tol * smax && v > 0.0).count()
}

/// exp(A) by scaling and squaring with a 12-term Taylor polynomial.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=12 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Orthonormal basis for the column span of `a` (rank by `rel_tol`).
pub fn orthonormalize(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let (u, s, _) = svd(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let r = s.iter().filter(|&&x| x > rel_tol * smax && x > 0.0).count();
    u.columns(0, r).into_owned()
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases of equal dimension; 1 if the dimensions differ.
pub fn max_principal_sine(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    if u.ncols() != v.ncols() {
        return 1.0;
    }
    if u.ncols() == 0 {
        return 0.0;
    }
    let resid = v - u * (u.transpose() * v);
    singular_values(&resid).first().copied().unwrap_or(0.0).min(1.0)
}

/// Running compression of a tall constraint matrix into its triangular factor:
/// the row space (and so the nullspace) is preserved while memory stays n×n.
#[derive(Debug, Clone)]
pub struct RowCompressor {
    ncols: usize,
    r: DMatrix<f64>,
}

impl RowCompressor {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, r: DMatrix::zeros(0, ncols) }
    }

    pub fn push(&mut self, rows: &DMatrix<f64>) {
        assert_eq!(rows.ncols(), self.ncols);
        if rows.nrows() == 0 {
            return;
        }
        let stacked = DMatrix::from_fn(self.r.nrows() + rows.nrows(), self.ncols, |i, j| {
            if i < self.r.nrows() {
                self.r[(i, j)]
            } else {
                rows[(i - self.r.nrows(), j)]
            }
        });
        self.r = if stacked.nrows() > self.ncols { stacked.qr().r() } else { stacked };
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        rank(&self.r, rel_tol)
    }
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut o = 0;
    for b in blocks {
        out.view_mut((o, o), b.shape()).copy_from(b);
        o += b.nrows();
    }
    out
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}
