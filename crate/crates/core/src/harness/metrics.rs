use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::full_eigendecomposition;
use crate::triplet::Triplet;

/// Column order of the metrics CSV. Bump [`METRICS_SCHEMA`] when it changes.
pub const METRICS_COLUMNS: [&str; 9] = [
    "method",
    "trial",
    "observed_count",
    "test_error",
    "train_error",
    "kernel_rank",
    "cumulative_seconds",
    "eig_computations",
    "projections_applied",
];
pub const METRICS_SCHEMA: &str = "metrics-v1";

/// One evaluation point of one method in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub trial: usize,
    pub observed_count: usize,
    pub test_error: f64,
    pub train_error: f64,
    /// Empty when rank tracking is disabled.
    pub kernel_rank: Option<usize>,
    /// Update (or solve) time only; evaluation is excluded.
    pub cumulative_seconds: f64,
    pub eig_computations: u64,
    pub projections_applied: u64,
}

impl MetricsRow {
    /// Copy with the timing column zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            cumulative_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Fraction of `triplets` the kernel does not strictly satisfy.
pub fn normalized_error(k: &Kernel, triplets: &[Triplet]) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = k.n();
    let mut violated = 0usize;
    for t in triplets {
        t.check(n)?;
        if !k.satisfies_unchecked(t) {
            violated += 1;
        }
    }
    Ok(violated as f64 / triplets.len() as f64)
}

/// Number of eigenvalues above `rel_tol · λ_max`.
pub fn kernel_rank(k: &Kernel, rel_tol: f64) -> Result<usize> {
    let eig = full_eigendecomposition(k.matrix())?;
    let top = eig.max_value();
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(eig.values.iter().filter(|&&v| v > rel_tol * top).count())
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}
