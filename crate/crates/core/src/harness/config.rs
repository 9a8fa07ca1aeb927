use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::online::StepPolicy;

/// Declarative description of a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub dataset: DatasetSpec,
    pub methods: Vec<MethodSpec>,
    /// Online methods are evaluated after every `eval_every` new triplets.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// One trial per seed.
    pub seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub track_rank: bool,
    #[serde(default = "default_rank_tol")]
    pub rank_rel_tol: f64,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_eval_every() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_rank_tol() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn trials(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed (trial) is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        self.dataset.validate()?;
        let mut labels = std::collections::HashSet::new();
        for m in &self.methods {
            m.validate()?;
            if !labels.insert(m.label()) {
                return Err(Error::Config(format!("duplicate method label {:?}", m.label())));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How queries are drawn from a synthetic point cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Answer every possible query, then split without replacement.
    All,
    /// Draw `train + val + test` i.i.d. uniform queries.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic {
        n: usize,
        d: usize,
        train: usize,
        #[serde(default)]
        val: usize,
        /// `None` takes every remaining triplet (only meaningful with `All`).
        #[serde(default)]
        test: Option<usize>,
        sampling: Sampling,
        /// Fixed cloud across trials; otherwise each trial draws its own.
        #[serde(default)]
        point_seed: Option<u64>,
    },
    File {
        path: PathBuf,
        train: usize,
        #[serde(default)]
        val: usize,
        #[serde(default)]
        test: Option<usize>,
    },
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::Synthetic {
                n,
                d,
                train,
                test,
                sampling,
                ..
            } => {
                if *n < 3 || *d < 1 {
                    return Err(Error::Config(format!("synthetic data needs n >= 3, d >= 1")));
                }
                if *train == 0 {
                    return Err(Error::Config("train size must be positive".into()));
                }
                if *sampling == Sampling::Random && test.is_none() {
                    return Err(Error::Config(
                        "random sampling needs an explicit test size".into(),
                    ));
                }
            }
            DatasetSpec::File { train, .. } => {
                if *train == 0 {
                    return Err(Error::Config("train size must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn train_size(&self) -> usize {
        match self {
            DatasetSpec::Synthetic { train, .. } | DatasetSpec::File { train, .. } => *train,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    Erkle {
        #[serde(default)]
        label: Option<String>,
        model: LossModel,
        policy: StepPolicy,
        #[serde(default = "one")]
        passes: usize,
    },
    Batch {
        #[serde(default)]
        label: Option<String>,
        model: LossModel,
        /// Re-solve after every `minibatch` new triplets.
        minibatch: usize,
        tau_grid: Vec<f64>,
        delta_grid: Vec<f64>,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_obj_tol")]
        obj_tol: f64,
        #[serde(default)]
        warm_start: bool,
    },
}

fn one() -> usize {
    1
}
fn default_max_iters() -> usize {
    1000
}
fn default_obj_tol() -> f64 {
    1e-7
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Erkle {
                label: Some(l), ..
            }
            | MethodSpec::Batch {
                label: Some(l), ..
            } => l.clone(),
            MethodSpec::Erkle {
                model,
                policy,
                passes,
                ..
            } => {
                let base = match policy {
                    StepPolicy::PaGnmds => "PA-ERKLE".to_string(),
                    StepPolicy::PaSte { p } => format!("PA-STE({p})-ERKLE"),
                    other => format!("{}-ERKLE[{}]", model.name().to_uppercase(), other),
                };
                format!("{base}(beta={passes})")
            }
            MethodSpec::Batch {
                model, minibatch, ..
            } => format!("{}-Batch(m={minibatch})", model.name().to_uppercase()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            MethodSpec::Erkle { policy, passes, .. } => {
                policy.validate()?;
                if *passes == 0 {
                    return Err(Error::Config("passes must be at least 1".into()));
                }
            }
            MethodSpec::Batch {
                minibatch,
                tau_grid,
                delta_grid,
                max_iters,
                obj_tol,
                ..
            } => {
                if *minibatch == 0 || *max_iters == 0 || !(*obj_tol > 0.0) {
                    return Err(Error::Config(
                        "minibatch, max_iters and obj_tol must be positive".into(),
                    ));
                }
                if tau_grid.is_empty() || delta_grid.is_empty() {
                    return Err(Error::Config("tau and delta grids must be nonempty".into()));
                }
                if tau_grid.iter().any(|t| !(*t >= 0.0)) || delta_grid.iter().any(|d| !(*d > 0.0)) {
                    return Err(Error::Config("tau >= 0 and delta > 0 required".into()));
                }
            }
        }
        Ok(())
    }
}

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1, "invalid log grid");
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let json = r#"{
            "dataset": {"kind": "synthetic", "n": 10, "d": 3, "train": 200, "test": 100,
                        "sampling": "random"},
            "methods": [
                {"kind": "erkle", "model": "gnmds", "policy": {"kind": "pa_gnmds"}},
                {"kind": "batch", "model": "gnmds", "minibatch": 100,
                 "tau_grid": [0.0, 0.1], "delta_grid": [0.01]}
            ],
            "seeds": [1, 2]
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.eval_every, 100);
        assert_eq!(cfg.trials(), 2);
        assert_eq!(cfg.methods[0].label(), "PA-ERKLE(beta=1)");
        assert_eq!(cfg.methods[1].label(), "GNMDS-Batch(m=100)");
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig {
            name: "x".into(),
            dataset: DatasetSpec::Synthetic {
                n: 10,
                d: 2,
                train: 100,
                val: 0,
                test: None,
                sampling: Sampling::Random,
                point_seed: None,
            },
            methods: vec![MethodSpec::Erkle {
                label: None,
                model: LossModel::Gnmds,
                policy: StepPolicy::PaGnmds,
                passes: 1,
            }],
            eval_every: 100,
            seeds: vec![1],
            track_rank: false,
            rank_rel_tol: 1e-6,
        };
        assert!(cfg.validate().is_err());
        if let DatasetSpec::Synthetic { sampling, .. } = &mut cfg.dataset {
            *sampling = Sampling::All;
        }
        assert!(cfg.validate().is_ok());
        cfg.methods.push(cfg.methods[0].clone());
        assert!(cfg.validate().is_err());
        cfg.methods.pop();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 10.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[4] - 10.0).abs() < 1e-12);
        assert!((g[2] - 0.1).abs() < 1e-12);
    }
}
