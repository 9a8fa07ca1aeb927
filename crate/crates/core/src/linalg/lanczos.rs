//! Extremal eigenpairs by restarted Lanczos.
//!
//! The Krylov basis is fully reorthogonalised (two Gram-Schmidt passes)
//! against itself and against any locked eigenvectors, which is what makes
//! deflation for [`top_k_eigenpairs`] work. When the basis reaches its
//! maximum size the iteration restarts from the current Ritz vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tridiag::{tridiagonal_min_eigenvalue, tridiagonal_min_vector};
use super::{axpy_vec, dot, norm, EigenPair, SymMatrix};
use crate::error::{Error, Result};

/// Largest Krylov basis kept between restarts.
const MAX_BASIS: usize = 160;
/// Matrix-vector products allowed per eigenpair, as a multiple of `n`.
const MATVECS_PER_DIM: usize = 50;
const START_SEED: u64 = 0x5eed_1a2c_705e_u64;
const CHECK_ALWAYS: usize = 8;
const CHECK_STRIDE: usize = 4;

/// Smallest eigenpair of `m`, with `‖Mv − λv‖ ≤ tol · max(1, ‖M‖_F)`.
pub fn smallest_eigenpair(m: &SymMatrix, tol: f64) -> Result<EigenPair> {
    extremal(m, 1.0, &[], tol)
}

/// Largest eigenpair of `m`, same residual contract as [`smallest_eigenpair`].
pub fn largest_eigenpair(m: &SymMatrix, tol: f64) -> Result<EigenPair> {
    extremal(m, -1.0, &[], tol)
}

/// The `k` algebraically largest eigenpairs, in descending order.
pub fn top_k_eigenpairs(m: &SymMatrix, k: usize, tol: f64) -> Result<Vec<EigenPair>> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::InvalidDims(format!("k = {k} must lie in 1..={n}")));
    }
    let mut found: Vec<EigenPair> = Vec::with_capacity(k);
    for _ in 0..k {
        let locked: Vec<&[f64]> = found.iter().map(|p| p.vector.as_slice()).collect();
        let pair = extremal(m, -1.0, &locked, tol)?;
        found.push(pair);
    }
    // Deflation finds them in order up to ties broken by rounding.
    found.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(found)
}

/// Smallest eigenpair of `sign · M` restricted to the orthogonal complement
/// of `locked`; the returned value is rescaled back to `M`.
fn extremal(m: &SymMatrix, sign: f64, locked: &[&[f64]], tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidDims(format!("tolerance must be positive, got {tol}")));
    }
    let n = m.n();
    let avail = n - locked.len();
    let scale = m.frobenius_norm().max(1.0);
    let target = tol * scale;
    let budget = MATVECS_PER_DIM * n;
    let max_basis = avail.min(MAX_BASIS);

    let op = |x: &[f64], y: &mut [f64]| {
        m.mul_vec_into(x, y);
        if sign < 0.0 {
            for yi in y.iter_mut() {
                *yi = -*yi;
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    if !orthonormalise(&mut start, locked) {
        return Err(Error::NonConvergence { iterations: 0 });
    }

    let mut matvecs = 0usize;
    let mut w = vec![0.0; n];
    loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
        let mut alpha: Vec<f64> = Vec::with_capacity(max_basis);
        let mut beta: Vec<f64> = Vec::with_capacity(max_basis);
        basis.push(start.clone());

        let mut last_theta = f64::INFINITY;
        let ritz = loop {
            let j = basis.len() - 1;
            op(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            axpy_vec(-a, &basis[j], &mut w);
            if j > 0 {
                axpy_vec(-beta[j - 1], &basis[j - 1], &mut w);
            }
            alpha.push(a);
            let before = norm(&w);
            reorthogonalise(&mut w, locked, &basis);
            let mut b = norm(&w);
            if b < 0.7 * before {
                reorthogonalise(&mut w, locked, &basis);
                b = norm(&w);
            }
            let breakdown = b <= 1e-14 * scale;
            let full = basis.len() == max_basis;
            // Ritz checks are cheap but not free; skip most of them once the
            // basis is past a handful of vectors.
            let check = j < CHECK_ALWAYS || (j + 1) % CHECK_STRIDE == 0 || breakdown || full;
            let (y, estimate) = if check {
                let theta = tridiagonal_min_eigenvalue(&alpha, &beta, last_theta, 1e-10);
                last_theta = theta + 1e-10 * scale;
                let y = tridiagonal_min_vector(&alpha, &beta, theta);
                let estimate = b * y[j].abs();
                (y, estimate)
            } else {
                (Vec::new(), f64::INFINITY)
            };

            if estimate <= 0.5 * target || breakdown || full {
                let mut x = vec![0.0; n];
                for (yi, q) in y.iter().zip(&basis) {
                    axpy_vec(*yi, q, &mut x);
                }
                break x;
            }
            if matvecs >= budget {
                return Err(Error::NonConvergence { iterations: matvecs });
            }
            beta.push(b);
            let inv = 1.0 / b;
            basis.push(w.iter().map(|x| x * inv).collect());
        };

        let mut x = ritz;
        if !orthonormalise(&mut x, locked) {
            return Err(Error::NonConvergence { iterations: matvecs });
        }
        op(&x, &mut w);
        matvecs += 1;
        let theta = dot(&x, &w);
        let resid = w
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= target {
            return Ok(EigenPair {
                value: sign * theta,
                vector: x,
            });
        }
        if matvecs >= budget {
            return Err(Error::NonConvergence { iterations: matvecs });
        }
        start = x;
    }
}

/// One classical Gram-Schmidt pass of `w` against `locked` and `basis`.
fn reorthogonalise(w: &mut [f64], locked: &[&[f64]], basis: &[Vec<f64>]) {
    let coeffs: Vec<f64> = locked
        .iter()
        .copied()
        .chain(basis.iter().map(Vec::as_slice))
        .map(|q| dot(q, w))
        .collect();
    for (c, q) in coeffs
        .iter()
        .zip(locked.iter().copied().chain(basis.iter().map(Vec::as_slice)))
    {
        axpy_vec(-c, q, w);
    }
}

/// Orthogonalises `x` against `locked`, then normalises. Returns false when
/// nothing is left.
fn orthonormalise(x: &mut [f64], locked: &[&[f64]]) -> bool {
    let before = norm(x);
    for _ in 0..2 {
        for q in locked {
            let c = dot(q, x);
            axpy_vec(-c, q, x);
        }
    }
    let after = norm(x);
    if !(after > 1e-10 * before) {
        return false;
    }
    for v in x.iter_mut() {
        *v /= after;
    }
    true
}
