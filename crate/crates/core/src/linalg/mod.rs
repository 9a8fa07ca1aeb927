//! Dense symmetric matrices and the eigen-computations used by the learners.
//!
//! Storage is dense row-major. Every write goes through an API that mirrors
//! the entry across the diagonal, so a [`SymMatrix`] is symmetric by
//! construction.
//!
//! Two eigensolvers live here:
//!
//! * [`full_eigendecomposition`]: Householder tridiagonalisation followed by
//!   implicit QL, `O(n³)`.
//! * [`smallest_eigenpair`], [`largest_eigenpair`], [`top_k_eigenpairs`]:
//!   Lanczos with full reorthogonalisation and explicit restarts. Each step
//!   costs one matrix-vector product plus `O(n·m)` reorthogonalisation, so a
//!   single extremal pair never requires a factorisation.

mod lanczos;
mod tridiag;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lanczos::{largest_eigenpair, smallest_eigenpair, top_k_eigenpairs};
pub use tridiag::full_eigendecomposition;

/// Default relative residual tolerance for the iterative eigensolvers.
pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// Dense symmetric `n × n` matrix, `n ≥ 2`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Panics if `n < 2`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 2, "SymMatrix requires n >= 2, got {n}");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * m.n + i] = v;
        }
        m
    }

    /// Builds a matrix from the upper triangle of `f(i, j)`, `i ≤ j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Rejects ragged or asymmetric input (absolute tolerance `1e-12`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidDims(format!("need n >= 2, got {n}")));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDims(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 || data.len() != n * n {
            return Err(Error::InvalidDims(format!(
                "{} entries do not form an n x n matrix with n = {n} >= 2",
                data.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (x, y) = (data[i * n + j], data[j * n + i]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                    return Err(Error::InvalidDims(format!(
                        "asymmetric entries at ({i}, {j}): {x} vs {y}"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Gram matrix `X Xᵀ` of the rows of `points`.
    pub fn gram(points: &[Vec<f64>]) -> Self {
        Self::from_fn(points.len(), |i, j| dot(&points[i], &points[j]))
    }

    /// `Σ λᵢ vᵢ vᵢᵀ`.
    pub fn from_eigenpairs(n: usize, pairs: &[EigenPair]) -> Self {
        let mut m = Self::zeros(n);
        for p in pairs {
            m.rank1_update(p.value, &p.vector);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Adds `delta` to `(i, j)` and its mirror; the diagonal is touched once.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, delta: f64) {
        self.data[i * self.n + j] += delta;
        if i != j {
            self.data[j * self.n + i] += delta;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self − other`.
    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `y ← M x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (yi, row) in y.iter_mut().zip(self.rows()) {
            *yi = dot(row, x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `M ← M + alpha · v vᵀ`.
    pub fn rank1_update(&mut self, alpha: f64, v: &[f64]) {
        assert_eq!(v.len(), self.n, "dimension mismatch");
        let n = self.n;
        for i in 0..n {
            let s = alpha * v[i];
            let row = &mut self.data[i * n..(i + 1) * n];
            for (rij, vj) in row.iter_mut().zip(v) {
                *rij += s * vj;
            }
        }
    }

    /// `M ← M + alpha · I`.
    pub fn shift_diagonal(&mut self, alpha: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += alpha;
        }
    }

    /// `M ← M + alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &SymMatrix) {
        assert_eq!(self.n, other.n, "dimension mismatch");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for x in &mut self.data {
            *x *= alpha;
        }
    }

    /// Upper bound on the spectral radius from Gershgorin discs.
    pub fn gershgorin_bound(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Number of structurally nonzero entries.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymMatrix({}x{}) [", self.n, self.n)?;
        for row in self.rows() {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// Eigenvalue with a unit-norm eigenvector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

impl EigenPair {
    /// `‖M v − λ v‖₂`.
    pub fn residual(&self, m: &SymMatrix) -> f64 {
        let mv = m.mul_vec(&self.vector);
        mv.iter()
            .zip(&self.vector)
            .map(|(a, b)| (a - self.value * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Full decomposition `M = V diag(values) Vᵀ`, values in descending order.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as rows: `vectors[k]` pairs with `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymmetricEigen {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn pair(&self, k: usize) -> EigenPair {
        EigenPair {
            value: self.values[k],
            vector: self.vectors[k].clone(),
        }
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("nonempty decomposition")
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    /// `V diag(g(values)) Vᵀ`.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.n();
        let mut m = SymMatrix::zeros(n);
        for (value, vector) in self.values.iter().zip(&self.vectors) {
            let w = g(*value);
            if w != 0.0 {
                m.rank1_update(w, vector);
            }
        }
        // Symmetrise rounding noise from the accumulated outer products.
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m.get(i, j) + m.get(j, i));
                m.set(i, j, avg);
            }
        }
        m
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|x| x)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Sixteen independent partial sums hide the add latency.
    let mut acc = [0.0f64; 16];
    let ca = a.chunks_exact(16);
    let cb = b.chunks_exact(16);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..16 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = 0.0;
    for v in acc {
        s += v;
    }
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn axpy_vec(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
