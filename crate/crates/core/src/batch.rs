//! Batch projected gradient descent with trace regularisation.
//!
//! Minimises `L(K, T) + τ·trace(K)` over the PSD cone by alternating a full
//! gradient step with the eigenvalue-clipping projection. This is the
//! `O(n³)`-per-iteration baseline that the online learner is compared to,
//! and [`minibatch_run`] replays it on growing prefixes of a triplet stream.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{full_eigendecomposition, SymMatrix};
use crate::loss::LossModel;
use crate::triplet::Triplet;

/// Objective growth (relative to the starting value) treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub enum BatchInit {
    Identity,
    WarmStart(Kernel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchConfig {
    pub model: LossModel,
    /// Trace weight `τ ≥ 0`.
    pub tau: f64,
    /// Fixed learning rate.
    pub delta: f64,
    pub max_iters: usize,
    /// Stop once the objective changes by less than this between iterations.
    pub obj_tol: f64,
    pub init: BatchInit,
}

impl BatchConfig {
    pub fn new(model: LossModel, tau: f64, delta: f64) -> Self {
        Self {
            model,
            tau,
            delta,
            max_iters: 1000,
            obj_tol: 1e-7,
            init: BatchInit::Identity,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_obj_tol(mut self, obj_tol: f64) -> Self {
        self.obj_tol = obj_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.obj_tol > 0.0) {
            return Err(Error::Config(format!("obj_tol must be > 0, got {}", self.obj_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BatchSolution {
    pub kernel: Kernel,
    pub iterations: usize,
    pub objective: f64,
    pub initial_objective: f64,
    /// Stopped on the objective-change rule rather than the iteration cap.
    pub converged: bool,
}

/// `Σ_t f(K, t) G(t) + τ I`.
pub fn batch_gradient(
    model: LossModel,
    k: &Kernel,
    triplets: &[Triplet],
    tau: f64,
) -> Result<SymMatrix> {
    let n = k.n();
    let mut grad = SymMatrix::zeros(n);
    for t in triplets {
        t.check(n)?;
        let f = model.weight_from_margin(k.margin_unchecked(t));
        if f != 0.0 {
            grad.add(t.a, t.b, -2.0 * f);
            grad.add(t.a, t.c, 2.0 * f);
            grad.add(t.b, t.b, f);
            grad.add(t.c, t.c, -f);
        }
    }
    if tau != 0.0 {
        grad.shift_diagonal(tau);
    }
    Ok(grad)
}

/// `L(K, T) + τ·trace(K)`.
pub fn objective(model: LossModel, k: &Kernel, triplets: &[Triplet], tau: f64) -> Result<f64> {
    Ok(model.total_loss(k, triplets)? + tau * k.matrix().trace())
}

/// Nearest PSD matrix in Frobenius norm: `V [Λ]₊ Vᵀ`.
pub fn project_psd_full(m: &SymMatrix) -> Result<SymMatrix> {
    Ok(full_eigendecomposition(m)?.reconstruct_with(|x| x.max(0.0)))
}

/// Projects and also returns a safe lower bound on the result's smallest
/// eigenvalue.
fn project_with_bound(m: &SymMatrix) -> Result<Kernel> {
    let eig = full_eigendecomposition(m)?;
    let projected = eig.reconstruct_with(|x| x.max(0.0));
    let n = m.n() as f64;
    let slack = 64.0 * f64::EPSILON * n * eig.max_value().abs().max(1.0);
    let bound = eig.min_value().max(0.0) - slack;
    Ok(Kernel::with_bound(projected, bound))
}

/// Projected gradient descent until the objective settles or the iteration
/// cap is reached.
pub fn solve_batch(config: &BatchConfig, triplets: &[Triplet], n: usize) -> Result<BatchSolution> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut k = match &config.init {
        BatchInit::Identity => Kernel::identity(n),
        BatchInit::WarmStart(k0) => {
            if k0.n() != n {
                return Err(Error::InvalidDims(format!(
                    "warm start has {} objects, expected {n}",
                    k0.n()
                )));
            }
            k0.clone()
        }
    };
    let initial = objective(config.model, &k, triplets, config.tau)?;
    let limit = DIVERGENCE_FACTOR * initial.abs();
    let mut prev = initial;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        let grad = batch_gradient(config.model, &k, triplets, config.tau)?;
        let mut stepped = k.into_matrix();
        stepped.axpy(-config.delta, &grad);
        if !stepped.is_finite() {
            return Err(Error::Divergence {
                objective: f64::INFINITY,
                limit,
            });
        }
        k = project_with_bound(&stepped)?;
        iterations += 1;

        let obj = objective(config.model, &k, triplets, config.tau)?;
        if initial > 0.0 && obj > limit {
            return Err(Error::Divergence {
                objective: obj,
                limit,
            });
        }
        let change = (obj - prev).abs();
        prev = obj;
        if change < config.obj_tol {
            converged = true;
            break;
        }
    }

    Ok(BatchSolution {
        kernel: k,
        iterations,
        objective: prev,
        initial_objective: initial,
        converged,
    })
}

/// Re-solves on every prefix of `stream` whose length is a multiple of `m`,
/// plus a final flush for a trailing partial chunk. `eval_hook` sees each
/// prefix length and solution as they are produced.
///
/// With `warm_start`, every solve after the first starts from the previous
/// solution instead of `config.init`.
pub fn minibatch_run<F>(
    stream: &[Triplet],
    m: usize,
    config: &BatchConfig,
    n: usize,
    warm_start: bool,
    mut eval_hook: F,
) -> Result<Vec<BatchSolution>>
where
    F: FnMut(usize, &BatchSolution) -> Result<()>,
{
    if m == 0 {
        return Err(Error::Config("mini-batch size must be at least 1".into()));
    }
    let mut out: Vec<BatchSolution> = Vec::new();
    let mut cfg = config.clone();
    for end in minibatch_prefixes(stream.len(), m) {
        if warm_start {
            if let Some(last) = out.last() {
                cfg.init = BatchInit::WarmStart(last.kernel.clone());
            }
        }
        let sol = solve_batch(&cfg, &stream[..end], n)?;
        eval_hook(end, &sol)?;
        out.push(sol);
    }
    Ok(out)
}

/// Prefix lengths at which a mini-batch re-solve happens.
pub fn minibatch_prefixes(len: usize, m: usize) -> Vec<usize> {
    let mut ends: Vec<usize> = (1..=len / m).map(|i| i * m).collect();
    if len % m != 0 {
        ends.push(len);
    }
    ends
}
