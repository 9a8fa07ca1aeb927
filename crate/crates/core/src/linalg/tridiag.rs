//! Householder tridiagonalisation and implicit QL iteration.
//!
//! Follows the classic EISPACK `tred2`/`tql2` pair. The orthogonal factor is
//! kept column-major so both the reflector sweeps and the Givens rotations
//! walk contiguous memory.

use super::{SymMatrix, SymmetricEigen};
use crate::error::{Error, Result};

/// QL sweeps allowed per eigenvalue before giving up.
const QL_MAX_SWEEPS: usize = 60;

/// Full symmetric eigendecomposition, eigenvalues in descending order.
pub fn full_eigendecomposition(m: &SymMatrix) -> Result<SymmetricEigen> {
    let n = m.n();
    // Column-major copy; for a symmetric input this is the same buffer.
    let mut v = m.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut d, &mut e, Some(&mut v))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| v[k * n..(k + 1) * n].to_vec())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples `i` and `i + 1`), ascending.
#[cfg(test)]
pub(crate) fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(off.len() + 1, n.max(1));
    let mut d = diag.to_vec();
    // tql2 expects e[i] to couple i - 1 and i.
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(off);
    tql2(n, &mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvector of a symmetric tridiagonal matrix for its smallest eigenvalue
/// `theta`, by shifted inverse iteration on an `LDLᵀ` factorisation.
/// Lower end of a bracket of width `rel_tol · ‖T‖` around the smallest
/// eigenvalue of the symmetric tridiagonal matrix, found by Sturm-count
/// bisection. `upper`, when finite, is a known upper bound that narrows the
/// starting interval.
pub(crate) fn tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64], upper: f64, rel_tol: f64) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |x| x.abs());
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    if n == 1 {
        return diag[0];
    }
    let tnorm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE * tnorm.max(1.0);
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| -> usize {
        let mut c = 0;
        let mut q = diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            c += 1;
        }
        for i in 1..n {
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    if upper < hi && upper >= lo && count_below(upper) >= 1 {
        hi = upper;
    }
    let tol = rel_tol.max(2.0 * f64::EPSILON) * tnorm;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

pub(crate) fn tridiagonal_min_vector(diag: &[f64], off: &[f64], theta: f64) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![1.0];
    }
    let tnorm = diag
        .iter()
        .map(|x| x.abs())
        .chain(off.iter().map(|x| x.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // Shift just below theta so T - shift I is positive definite.
    let delta = 1e-12 * tnorm + 1e3 * f64::MIN_POSITIVE;
    let shift = theta - delta;
    let floor = f64::EPSILON * tnorm;

    let mut piv = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    piv[0] = diag[0] - shift;
    if piv[0] <= floor {
        piv[0] = floor;
    }
    for i in 1..n {
        l[i - 1] = off[i - 1] / piv[i - 1];
        piv[i] = diag[i] - shift - l[i - 1] * off[i - 1];
        if piv[i] <= floor {
            piv[i] = floor;
        }
    }

    let mut y = vec![1.0; n];
    for _ in 0..3 {
        // Forward: L z = y.
        for i in 1..n {
            y[i] -= l[i - 1] * y[i - 1];
        }
        // Diagonal and backward: D Lᵀ x = z.
        for i in 0..n {
            y[i] /= piv[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        let nrm = super::norm(&y);
        for x in &mut y {
            *x /= nrm;
        }
    }
    y
}

/// Householder reduction of the column-major symmetric matrix `v` to
/// tridiagonal form; on return `v` holds the accumulated transformation.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| c * n + r;

    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                let col = j * n;
                for k in (j + 1)..i {
                    let vkj = v[col + k];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = j * n;
                for k in j..i {
                    v[col + k] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let (cj, ci) = (j * n, (i + 1) * n);
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[ci + k] * v[cj + k];
                }
                for k in 0..=i {
                    v[cj + k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)` where `e[i]` couples `i - 1`
/// and `i`. When `v` is given, rotations are applied to its columns.
fn tql2(n: usize, d: &mut [f64], e: &mut [f64], mut v: Option<&mut [f64]>) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > QL_MAX_SWEEPS {
                    return Err(Error::NonConvergence { iterations: sweeps });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(v) = v.as_deref_mut() {
                        let (lo, hi) = v.split_at_mut((i + 1) * n);
                        let col_i = &mut lo[i * n..];
                        let col_i1 = &mut hi[..n];
                        for (a, b) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
