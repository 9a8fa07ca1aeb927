use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetSpec, ExperimentConfig, MethodSpec, Sampling};
use super::metrics::{kernel_rank, normalized_error, MetricsRow, METRICS_SCHEMA};
use crate::batch::{minibatch_run, solve_batch, BatchConfig};
use crate::data::{all_queries, answer_all, gen_points, load_triplets, sample_queries, split, Split};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::online::{LearnerConfig, OnlineLearner};
use crate::triplet::Triplet;

/// Train/validation/test triplets of one trial.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub n: usize,
    pub split: Split,
}

/// Hyperparameters picked on the validation split for one batch method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: String,
    pub trial: usize,
    pub tau: f64,
    pub delta: f64,
    pub val_error: f64,
    /// Grid points that diverged and were discarded.
    pub diverged: usize,
    pub grid_seconds: f64,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub library_version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub selections: Vec<Selection>,
    pub rows_written: usize,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds the data of the trial driven by `seed`.
pub fn prepare_trial(dataset: &DatasetSpec, seed: u64) -> Result<TrialData> {
    match dataset {
        DatasetSpec::Synthetic {
            n,
            d,
            train,
            val,
            test,
            sampling,
            point_seed,
        } => {
            let cloud = gen_points(*n, *d, point_seed.unwrap_or(mix(seed, 1)))?;
            let split = match sampling {
                Sampling::All => {
                    let rows = answer_all(&cloud, all_queries(*n))?;
                    split(&rows, *train, *val, *test, mix(seed, 2))?
                }
                Sampling::Random => {
                    let test = test.ok_or_else(|| {
                        Error::Config("random sampling needs an explicit test size".into())
                    })?;
                    let total = train + val + test;
                    let qs = sample_queries(*n, total, mix(seed, 3))?;
                    let rows = answer_all(&cloud, qs)?;
                    Split {
                        train: rows[..*train].to_vec(),
                        val: rows[*train..train + val].to_vec(),
                        test: rows[train + val..].to_vec(),
                    }
                }
            };
            Ok(TrialData { n: *n, split })
        }
        DatasetSpec::File {
            path,
            train,
            val,
            test,
        } => {
            let file = load_triplets(path)?;
            let split = split(&file.rows, *train, *val, *test, mix(seed, 2))?;
            Ok(TrialData {
                n: file.n_declared,
                split,
            })
        }
    }
}

struct Evaluator<'a> {
    method: String,
    trial: usize,
    train: &'a [Triplet],
    test: &'a [Triplet],
    track_rank: bool,
    rank_rel_tol: f64,
}

impl Evaluator<'_> {
    fn row(
        &self,
        k: &Kernel,
        observed: usize,
        seconds: f64,
        eig_computations: u64,
        projections_applied: u64,
    ) -> Result<MetricsRow> {
        let test_error = if self.test.is_empty() {
            f64::NAN
        } else {
            normalized_error(k, self.test)?
        };
        Ok(MetricsRow {
            method: self.method.clone(),
            trial: self.trial,
            observed_count: observed,
            test_error,
            train_error: normalized_error(k, &self.train[..observed])?,
            kernel_rank: if self.track_rank {
                Some(kernel_rank(k, self.rank_rel_tol)?)
            } else {
                None
            },
            cumulative_seconds: seconds,
            eig_computations,
            projections_applied,
        })
    }
}

/// Runs every (trial, method) pair in order, handing each evaluation row to
/// `sink` as soon as it is computed.
pub fn run_experiment<F>(config: &ExperimentConfig, mut sink: F) -> Result<RunManifest>
where
    F: FnMut(&MetricsRow) -> Result<()>,
{
    config.validate()?;
    let mut manifest = RunManifest {
        schema: METRICS_SCHEMA.to_string(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds: config.seeds.clone(),
        selections: Vec::new(),
        rows_written: 0,
    };
    for (trial, &seed) in config.seeds.iter().enumerate() {
        let data = prepare_trial(&config.dataset, seed)?;
        if data.split.train.is_empty() {
            return Err(Error::EmptySet);
        }
        for method in &config.methods {
            let eval = Evaluator {
                method: method.label(),
                trial,
                train: &data.split.train,
                test: &data.split.test,
                track_rank: config.track_rank,
                rank_rel_tol: config.rank_rel_tol,
            };
            let mut emit = |row: MetricsRow| -> Result<()> {
                manifest.rows_written += 1;
                sink(&row)
            };
            match method {
                MethodSpec::Erkle {
                    model,
                    policy,
                    passes,
                    ..
                } => {
                    let cfg = LearnerConfig::new(data.n, *model, *policy)
                        .with_passes(*passes)
                        .with_seed(mix(seed, 4));
                    run_erkle(cfg, &eval, config.eval_every, &mut emit)?;
                }
                MethodSpec::Batch {
                    model,
                    minibatch,
                    tau_grid,
                    delta_grid,
                    max_iters,
                    obj_tol,
                    warm_start,
                    ..
                } => {
                    let base = BatchConfig::new(*model, 0.0, 1.0)
                        .with_max_iters(*max_iters)
                        .with_obj_tol(*obj_tol);
                    let sel = select_hyperparameters(
                        &base,
                        tau_grid,
                        delta_grid,
                        &data,
                        eval.method.clone(),
                        trial,
                    )?;
                    let mut cfg = base;
                    cfg.tau = sel.tau;
                    cfg.delta = sel.delta;
                    manifest.selections.push(sel);
                    run_minibatch(&cfg, data.n, *minibatch, *warm_start, &eval, &mut emit)?;
                }
            }
        }
    }
    Ok(manifest)
}

fn run_erkle<E>(cfg: LearnerConfig, eval: &Evaluator, every: usize, emit: &mut E) -> Result<()>
where
    E: FnMut(MetricsRow) -> Result<()>,
{
    let mut learner = OnlineLearner::new(cfg)?;
    let mut seconds = 0.0;
    let len = eval.train.len();
    for (i, t) in eval.train.iter().enumerate() {
        let start = Instant::now();
        learner.observe_with_replay(*t)?;
        seconds += start.elapsed().as_secs_f64();
        let seen = i + 1;
        if seen % every == 0 || seen == len {
            let s = learner.stats();
            emit(eval.row(
                learner.kernel(),
                seen,
                seconds,
                s.eig_computations,
                s.projections_applied,
            )?)?;
        }
    }
    Ok(())
}

fn run_minibatch<E>(
    cfg: &BatchConfig,
    n: usize,
    m: usize,
    warm_start: bool,
    eval: &Evaluator,
    emit: &mut E,
) -> Result<()>
where
    E: FnMut(MetricsRow) -> Result<()>,
{
    let mut seconds = 0.0;
    let mut iterations = 0u64;
    let mut mark = Instant::now();
    minibatch_run(eval.train, m, cfg, n, warm_start, |end, sol| {
        seconds += mark.elapsed().as_secs_f64();
        // every iteration performs one full eigendecomposition
        iterations += sol.iterations as u64;
        let row = eval.row(&sol.kernel, end, seconds, iterations, iterations)?;
        emit(row)?;
        mark = Instant::now();
        Ok(())
    })?;
    Ok(())
}

/// Grid search over `(τ, δ)` on the full training set, scored by validation
/// error (training error when there is no validation split). Ties go to the
/// smaller `τ`, then the smaller `δ`. Diverging points are skipped.
pub fn select_hyperparameters(
    base: &BatchConfig,
    tau_grid: &[f64],
    delta_grid: &[f64],
    data: &TrialData,
    method: String,
    trial: usize,
) -> Result<Selection> {
    let mut taus = tau_grid.to_vec();
    taus.sort_by(f64::total_cmp);
    let mut deltas = delta_grid.to_vec();
    deltas.sort_by(f64::total_cmp);
    let scoring = if data.split.val.is_empty() {
        &data.split.train
    } else {
        &data.split.val
    };
    let start = Instant::now();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut diverged = 0;
    for &tau in &taus {
        for &delta in &deltas {
            let mut cfg = base.clone();
            cfg.tau = tau;
            cfg.delta = delta;
            let sol = match solve_batch(&cfg, &data.split.train, data.n) {
                Ok(sol) => sol,
                Err(Error::Divergence { .. }) => {
                    diverged += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let err = normalized_error(&sol.kernel, scoring)?;
            if best.is_none_or(|(_, _, e)| err < e) {
                best = Some((tau, delta, err));
            }
        }
    }
    let (tau, delta, val_error) = best.ok_or_else(|| {
        Error::Config(format!("every grid point diverged for {method}"))
    })?;
    Ok(Selection {
        method,
        trial,
        tau,
        delta,
        val_error,
        diverged,
        grid_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Paths written by [`run_to_dir`].
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub metrics_csv: PathBuf,
    pub manifest_json: PathBuf,
    pub manifest: RunManifest,
}

/// Runs the experiment writing `metrics.csv` (flushed after every row) and
/// `manifest.json` into `out_dir`.
pub fn run_to_dir(config: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<RunOutputs> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let metrics_csv = out_dir.join("metrics.csv");
    let manifest_json = out_dir.join("manifest.json");
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&metrics_csv)?));
    let manifest = run_experiment(config, |row| {
        writer.serialize(row)?;
        writer.flush()?;
        Ok(())
    })?;
    writer.flush()?;
    let mut f = BufWriter::new(File::create(&manifest_json)?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(RunOutputs {
        metrics_csv,
        manifest_json,
        manifest,
    })
}

/// Reads a metrics CSV produced by [`run_to_dir`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
