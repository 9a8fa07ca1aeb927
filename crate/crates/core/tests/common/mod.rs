#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use rckl::{SymMatrix, Triplet};

/// Cyclic Jacobi eigenvalue iteration. Slow but independent of the library
/// solvers. Returns eigenvalues (unsorted) and eigenvectors as columns of `v`.
pub fn jacobi_eigen(m: &SymMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.n();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Eigenvalues clipped at zero and reassembled, via Jacobi.
pub fn jacobi_clip(m: &SymMatrix) -> SymMatrix {
    let n = m.n();
    let (vals, v) = jacobi_eigen(m);
    SymMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| vals[k].max(0.0) * v[i][k] * v[j][k]).sum()
    })
}

pub fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs
}

/// Gram matrix of `n` Gaussian points in `rank` dimensions, scaled by `scale`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize, scale: f64) -> SymMatrix {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..rank).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    SymMatrix::gram(&pts)
}

pub fn random_triplet<R: Rng>(rng: &mut R, n: usize) -> Triplet {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n);
    while b == a {
        b = rng.random_range(0..n);
    }
    let mut c = rng.random_range(0..n);
    while c == a || c == b {
        c = rng.random_range(0..n);
    }
    Triplet { a, b, c }
}

/// `d²(a,b) − d²(a,c)` written out from the matrix entries.
pub fn margin_by_hand(m: &SymMatrix, t: &Triplet) -> f64 {
    let d = |x: usize, y: usize| m.get(x, x) + m.get(y, y) - 2.0 * m.get(x, y);
    d(t.a, t.b) - d(t.a, t.c)
}
