use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::metrics::MetricsRow;
use crate::error::{Error, Result};

/// Mean and spread of one column across trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    /// Half-width of the two-sided 95% Student-t interval; NaN for one trial.
    pub ci95: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySet);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() == 1 {
            return Ok(Self {
                mean,
                std: 0.0,
                ci95: f64::NAN,
            });
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 1.0)
            .map_err(|e| Error::Config(e.to_string()))?
            .inverse_cdf(0.975);
        Ok(Self {
            mean,
            std,
            ci95: t * std / n.sqrt(),
        })
    }
}

/// Cross-trial summary at one evaluation point of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub observed_count: usize,
    pub trials: usize,
    pub test_error_mean: f64,
    pub test_error_std: f64,
    pub test_error_ci95: f64,
    pub train_error_mean: f64,
    pub seconds_mean: f64,
    pub seconds_ci95: f64,
    pub eig_computations_mean: f64,
    pub eig_computations_std: f64,
    pub kernel_rank_mean: Option<f64>,
}

/// Groups rows by method and evaluation point, in order of first appearance
/// of each method.
pub fn aggregate(rows: &[MetricsRow]) -> Result<Vec<AggregateRow>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        let mi = match order.iter().position(|m| *m == r.method) {
            Some(i) => i,
            None => {
                order.push(&r.method);
                order.len() - 1
            }
        };
        groups.entry((mi, r.observed_count)).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((mi, observed_count), g) in groups {
        let col = |f: fn(&MetricsRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
        let test = Summary::of(&col(|r| r.test_error))?;
        let train = Summary::of(&col(|r| r.train_error))?;
        let secs = Summary::of(&col(|r| r.cumulative_seconds))?;
        let eig = Summary::of(&col(|r| r.eig_computations as f64))?;
        let ranks: Option<Vec<f64>> = g.iter().map(|r| r.kernel_rank.map(|k| k as f64)).collect();
        let kernel_rank_mean = match ranks {
            Some(r) => Some(Summary::of(&r)?.mean),
            None => None,
        };
        out.push(AggregateRow {
            method: order[mi].to_string(),
            observed_count,
            trials: g.len(),
            test_error_mean: test.mean,
            test_error_std: test.std,
            test_error_ci95: test.ci95,
            train_error_mean: train.mean,
            seconds_mean: secs.mean,
            seconds_ci95: secs.ci95,
            eig_computations_mean: eig.mean,
            eig_computations_std: eig.std,
            kernel_rank_mean,
        });
    }
    Ok(out)
}

pub fn write_aggregate<W: Write>(w: W, rows: &[AggregateRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
