//! The learned similarity kernel and the sparse canonical-gradient update.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{smallest_eigenpair, SymMatrix, DEFAULT_EIG_TOL};
use crate::triplet::Triplet;

/// PSD similarity kernel over `n` objects together with a conservative lower
/// bound on its smallest eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    mat: SymMatrix,
    eig_lower_bound: f64,
}

impl Kernel {
    /// `I_n`, whose smallest eigenvalue is exactly 1.
    pub fn identity(n: usize) -> Self {
        Self {
            mat: SymMatrix::identity(n),
            eig_lower_bound: 1.0,
        }
    }

    /// Wraps `mat`, computing the bound with one extremal eigensolve.
    pub fn from_matrix(mat: SymMatrix) -> Result<Self> {
        if !mat.is_finite() {
            return Err(Error::NonFinite("kernel entries"));
        }
        let pair = smallest_eigenpair(&mat, DEFAULT_EIG_TOL)?;
        let slack = DEFAULT_EIG_TOL * mat.frobenius_norm().max(1.0);
        Ok(Self {
            mat,
            eig_lower_bound: pair.value - slack,
        })
    }

    /// Wraps `mat` with a caller-supplied bound. The caller vouches that the
    /// bound does not exceed the true smallest eigenvalue.
    pub fn with_bound(mat: SymMatrix, eig_lower_bound: f64) -> Self {
        Self {
            mat,
            eig_lower_bound,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.mat.n()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.mat
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut SymMatrix {
        &mut self.mat
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.mat
    }

    pub fn eig_lower_bound(&self) -> f64 {
        self.eig_lower_bound
    }

    pub(crate) fn set_eig_lower_bound(&mut self, bound: f64) {
        self.eig_lower_bound = bound;
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.n() {
            return Err(Error::IndexOutOfRange { index, n: self.n() });
        }
        Ok(())
    }

    /// `K_aa + K_bb − 2 K_ab`.
    pub fn sq_distance(&self, a: usize, b: usize) -> Result<f64> {
        self.check_index(a)?;
        self.check_index(b)?;
        Ok(self.sq_distance_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn sq_distance_unchecked(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        self.mat.get(a, a) + self.mat.get(b, b) - 2.0 * self.mat.get(a, b)
    }

    /// `d²(a, b) − d²(a, c)`; negative means the triplet is satisfied.
    #[inline]
    pub(crate) fn margin_unchecked(&self, t: &Triplet) -> f64 {
        self.sq_distance_unchecked(t.a, t.b) - self.sq_distance_unchecked(t.a, t.c)
    }

    pub fn margin(&self, t: &Triplet) -> Result<f64> {
        t.check(self.n())?;
        Ok(self.margin_unchecked(t))
    }

    /// Strict `d²(a, b) < d²(a, c)`; ties are unsatisfied.
    pub fn satisfies(&self, t: &Triplet) -> Result<bool> {
        t.check(self.n())?;
        Ok(self.satisfies_unchecked(t))
    }

    #[inline]
    pub(crate) fn satisfies_unchecked(&self, t: &Triplet) -> bool {
        self.sq_distance_unchecked(t.a, t.b) < self.sq_distance_unchecked(t.a, t.c)
    }

    /// `K ← K − γ G(t)` touching only the eight entries of the canonical
    /// gradient. PSD-ness is not restored here; the eigenvalue bound is
    /// lowered by `3|γ|`.
    pub fn apply_gradient_step(&mut self, t: &Triplet, gamma: f64) -> Result<()> {
        t.check(self.n())?;
        if !gamma.is_finite() {
            return Err(Error::NonFinite("step magnitude"));
        }
        self.apply_gradient_step_unchecked(t, gamma);
        Ok(())
    }

    pub(crate) fn apply_gradient_step_unchecked(&mut self, t: &Triplet, gamma: f64) {
        let Triplet { a, b, c } = *t;
        let m = &mut self.mat;
        m.add(a, b, 2.0 * gamma);
        m.add(a, c, -2.0 * gamma);
        m.add(b, b, -gamma);
        m.add(c, c, gamma);
        self.eig_lower_bound -= 3.0 * gamma.abs();
    }

    /// Smallest eigenvalue via the iterative solver.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(smallest_eigenpair(&self.mat, DEFAULT_EIG_TOL)?.value)
    }

    /// Writes the textual checkpoint: `n`, then `n` rows of `n` floats, then
    /// `lower_bound <float>`. Floats use the shortest round-trip form.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        writeln!(w, "{n}")?;
        let mut line = String::with_capacity(n * 20);
        for row in self.mat.rows() {
            line.clear();
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&x.to_string());
            }
            writeln!(w, "{line}")?;
        }
        writeln!(w, "lower_bound {}", self.eig_lower_bound)?;
        Ok(())
    }

    pub fn to_checkpoint_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("checkpoint is ASCII")
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected end of checkpoint, expected {what}"),
                }),
            }
        };

        let (ln, header) = next("dimension")?;
        let n: usize = header.trim().parse().map_err(|_| Error::Parse {
            line: ln,
            message: format!("invalid dimension {header:?}"),
        })?;
        if n < 2 {
            return Err(Error::Parse {
                line: ln,
                message: format!("dimension must be at least 2, got {n}"),
            });
        }
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n {
            let (ln, row) = next("matrix row")?;
            let before = data.len();
            for tok in row.split_whitespace() {
                let x: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: ln,
                    message: format!("invalid float {tok:?}"),
                })?;
                data.push(x);
            }
            if data.len() - before != n {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("expected {n} entries, found {}", data.len() - before),
                });
            }
        }
        let (ln, footer) = next("lower_bound line")?;
        let bound = match footer.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["lower_bound", v] => v.parse::<f64>().ok(),
            _ => None,
        }
        .ok_or_else(|| Error::Parse {
            line: ln,
            message: format!("expected `lower_bound <float>`, found {footer:?}"),
        })?;
        let mat = SymMatrix::from_row_major(n, data).map_err(|e| Error::Parse {
            line: 2,
            message: e.to_string(),
        })?;
        Ok(Self::with_bound(mat, bound))
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        Self::read_checkpoint(s.as_bytes())
    }
}

/// Dense canonical gradient matrix `G(t)` for a triplet over `n` objects.
///
/// Only used by tests, diagnostics, and the batch solver's cross-checks;
/// the online path never materialises it.
pub fn canonical_gradient(n: usize, t: &Triplet) -> Result<SymMatrix> {
    t.check(n)?;
    let mut g = SymMatrix::zeros(n);
    g.set(t.a, t.b, -2.0);
    g.set(t.a, t.c, 2.0);
    g.set(t.b, t.b, 1.0);
    g.set(t.c, t.c, -1.0);
    Ok(g)
}
