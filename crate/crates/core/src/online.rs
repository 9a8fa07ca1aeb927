//! Online kernel learning, one triplet at a time.
//!
//! Each observation takes a stochastic step along the canonical gradient
//! `G(t)` (six touched entries), lowers the running eigenvalue bound by
//! `3γ` and only calls the extremal eigensolver when that bound goes
//! negative. Because `γG` has exactly one negative eigenvalue, a single
//! rank-1 correction `K − λ↓ v↓ v↓ᵀ` is enough to return to the PSD cone.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{smallest_eigenpair, DEFAULT_EIG_TOL};
use crate::loss::LossModel;
use crate::triplet::Triplet;

/// Rule producing the step size `δ_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPolicy {
    Constant { delta: f64 },
    InverseJ { delta0: f64 },
    InverseSqrtJ { delta0: f64 },
    /// Minimal step that satisfies the triplet by a margin of one.
    PaGnmds,
    /// Minimal step that lifts the logistic satisfaction probability to `p`.
    PaSte { p: f64 },
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPolicyParam(msg));
        match *self {
            StepPolicy::Constant { delta } if !(delta > 0.0 && delta.is_finite()) => {
                bad(format!("constant step must be positive, got {delta}"))
            }
            StepPolicy::InverseJ { delta0 } | StepPolicy::InverseSqrtJ { delta0 }
                if !(delta0 > 0.0 && delta0.is_finite()) =>
            {
                bad(format!("initial step must be positive, got {delta0}"))
            }
            StepPolicy::PaSte { p } if !(p > 0.5 && p < 1.0) => {
                bad(format!("target probability must lie in (0.5, 1), got {p}"))
            }
            _ => Ok(()),
        }
    }

    /// Passive-aggressive policies already fold the gradient weight into
    /// their output.
    pub fn is_passive_aggressive(&self) -> bool {
        matches!(self, StepPolicy::PaGnmds | StepPolicy::PaSte { .. })
    }

    /// Required margin offset `κ = log P − log(1 − P)`; one for GNMDS.
    fn pa_offset(&self) -> Option<f64> {
        match *self {
            StepPolicy::PaGnmds => Some(1.0),
            StepPolicy::PaSte { p } => Some(p.ln() - (1.0 - p).ln()),
            _ => None,
        }
    }

    /// Step size for the `j`-th step (`j ≥ 1`) given the current margin
    /// `x = d²(a,b) − d²(a,c)`.
    fn step_from_margin(&self, x: f64, j: u64) -> f64 {
        match *self {
            StepPolicy::Constant { delta } => delta,
            StepPolicy::InverseJ { delta0 } => delta0 / j as f64,
            StepPolicy::InverseSqrtJ { delta0 } => delta0 / (j as f64).sqrt(),
            StepPolicy::PaGnmds | StepPolicy::PaSte { .. } => {
                let kappa = self.pa_offset().expect("PA policy");
                ((x + kappa) / 10.0).max(0.0)
            }
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for StepPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepPolicy::Constant { delta } => write!(f, "constant:{delta}"),
            StepPolicy::InverseJ { delta0 } => write!(f, "inv-j:{delta0}"),
            StepPolicy::InverseSqrtJ { delta0 } => write!(f, "inv-sqrt-j:{delta0}"),
            StepPolicy::PaGnmds => write!(f, "pa-gnmds"),
            StepPolicy::PaSte { p } => write!(f, "pa-ste:{p}"),
        }
    }
}

/// Parses `constant:<δ>`, `inv-j[:<δ₀>]`, `inv-sqrt-j[:<δ₀>]`, `pa-gnmds`,
/// `pa-ste:<P>`. `δ₀` defaults to 1.
impl FromStr for StepPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            arg.ok_or_else(|| Error::InvalidPolicyParam(format!("{name} needs {what}")))?
                .parse()
                .map_err(|_| Error::InvalidPolicyParam(format!("bad {what} in {s:?}")))
        };
        let policy = match name.to_ascii_lowercase().as_str() {
            "constant" => StepPolicy::Constant { delta: num("a step size")? },
            "inv-j" => StepPolicy::InverseJ {
                delta0: if arg.is_some() { num("an initial step")? } else { 1.0 },
            },
            "inv-sqrt-j" => StepPolicy::InverseSqrtJ {
                delta0: if arg.is_some() { num("an initial step")? } else { 1.0 },
            },
            "pa-gnmds" | "pa" => StepPolicy::PaGnmds,
            "pa-ste" => StepPolicy::PaSte { p: num("a probability")? },
            other => return Err(Error::InvalidPolicyParam(format!("unknown policy {other:?}"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Step size `δ_j` for triplet `t` at step index `j ≥ 1`.
///
/// Schedule policies ignore the kernel; passive-aggressive policies return
/// zero once the triplet already meets its margin (or probability) target.
pub fn step_size(
    policy: &StepPolicy,
    _model: LossModel,
    k: &Kernel,
    t: &Triplet,
    j: u64,
) -> Result<f64> {
    policy.validate()?;
    if j == 0 {
        return Err(Error::InvalidPolicyParam("step index starts at 1".into()));
    }
    Ok(policy.step_from_margin(k.margin(t)?, j))
}

/// Outcome of [`project_psd_rank1`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneProjection {
    /// Smallest eigenvalue found before projecting.
    pub min_eigenvalue: f64,
    /// Whether the negative direction was removed.
    pub applied: bool,
}

/// Removes the single negative eigen-direction of `k`, if any, and refreshes
/// the eigenvalue bound to `max(0, λ↓)`.
///
/// Exact nearest-PSD projection only when `k` has at most one negative
/// eigenvalue, which holds after one canonical step from a PSD kernel.
pub fn project_psd_rank1(k: &mut Kernel, tol: f64) -> Result<RankOneProjection> {
    let pair = smallest_eigenpair(k.matrix(), tol)?;
    let applied = pair.value < 0.0;
    if applied {
        k.matrix_mut().rank1_update(-pair.value, &pair.vector);
    }
    k.set_eig_lower_bound(pair.value.max(0.0));
    Ok(RankOneProjection {
        min_eigenvalue: pair.value,
        applied,
    })
}

/// Counters describing how often the eigensolver was needed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    /// Steps with nonzero magnitude.
    pub updates: u64,
    /// Steps with zero magnitude; the kernel was left untouched.
    pub passive: u64,
    pub eig_computations: u64,
    /// Eigensolves that found and removed a negative eigenvalue.
    pub projections_applied: u64,
    /// Steps certified PSD by the eigenvalue bound alone.
    pub skipped: u64,
}

/// What a single step did.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub triplet: Triplet,
    /// Step magnitude `γ = δ f`.
    pub gamma: f64,
    /// True for the newly observed triplet, false for replayed ones.
    pub fresh: bool,
    /// The eigensolver ran.
    pub eig_computed: bool,
    /// A negative eigenvalue was removed.
    pub projected: bool,
    /// The bound certified PSD-ness, no eigensolve needed.
    pub skipped: bool,
    pub eig_lower_bound: f64,
}

impl UpdateReport {
    pub fn is_passive(&self) -> bool {
        self.gamma == 0.0
    }
}

/// Static configuration of an [`OnlineLearner`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub n: usize,
    pub model: LossModel,
    pub policy: StepPolicy,
    /// Steps per new observation (`β`); `β − 1` of them replay old triplets.
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
}

fn default_passes() -> usize {
    1
}

fn default_eig_tol() -> f64 {
    DEFAULT_EIG_TOL
}

impl LearnerConfig {
    pub fn new(n: usize, model: LossModel, policy: StepPolicy) -> Self {
        Self {
            n,
            model,
            policy,
            passes: 1,
            seed: 0,
            eig_tol: DEFAULT_EIG_TOL,
        }
    }

    /// PA-GNMDS, the parameter-free default.
    pub fn passive_aggressive(n: usize) -> Self {
        Self::new(n, LossModel::Gnmds, StepPolicy::PaGnmds)
    }

    pub fn with_passes(mut self, passes: usize) -> Self {
        self.passes = passes;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidDims(format!(
                "need at least 3 objects, got {}",
                self.n
            )));
        }
        if self.passes == 0 {
            return Err(Error::InvalidPolicyParam("passes must be at least 1".into()));
        }
        if !(self.eig_tol > 0.0) {
            return Err(Error::InvalidPolicyParam(format!(
                "eigensolver tolerance must be positive, got {}",
                self.eig_tol
            )));
        }
        self.policy.validate()
    }
}

/// Mutable progress of a learner, enough to resume it bit-exactly given the
/// kernel and the replay buffer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub observed_count: u64,
    pub stats: ProjectionStats,
    pub rng_word_pos: u128,
}

/// Online learner starting from the identity kernel.
#[derive(Clone, Debug)]
pub struct OnlineLearner {
    config: LearnerConfig,
    kernel: Kernel,
    observed: Vec<Triplet>,
    j: u64,
    rng: ChaCha8Rng,
    stats: ProjectionStats,
}

impl OnlineLearner {
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            kernel: Kernel::identity(config.n),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            observed: Vec::new(),
            j: 0,
            stats: ProjectionStats::default(),
        })
    }

    /// Rebuilds a learner from a checkpointed kernel, its replay buffer and
    /// saved counters.
    pub fn resume(
        config: LearnerConfig,
        kernel: Kernel,
        observed: Vec<Triplet>,
        state: LearnerState,
    ) -> Result<Self> {
        config.validate()?;
        if kernel.n() != config.n {
            return Err(Error::InvalidDims(format!(
                "checkpoint has {} objects, config expects {}",
                kernel.n(),
                config.n
            )));
        }
        if observed.len() as u64 != state.observed_count {
            return Err(Error::Config(format!(
                "replay buffer holds {} triplets but state records {}",
                observed.len(),
                state.observed_count
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_word_pos(state.rng_word_pos);
        Ok(Self {
            config,
            kernel,
            observed,
            j: state.observed_count,
            rng,
            stats: state.stats,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn into_kernel(self) -> Kernel {
        self.kernel
    }

    pub fn stats(&self) -> &ProjectionStats {
        &self.stats
    }

    /// Number of triplets observed so far (`j`).
    pub fn observed_count(&self) -> u64 {
        self.j
    }

    pub fn observed(&self) -> &[Triplet] {
        &self.observed
    }

    pub fn state(&self) -> LearnerState {
        LearnerState {
            observed_count: self.j,
            stats: self.stats,
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    /// Incorporates one new triplet with a single step.
    pub fn observe(&mut self, t: Triplet) -> Result<UpdateReport> {
        t.check(self.config.n)?;
        let j = self.j + 1;
        let report = self.step(t, j, true)?;
        self.observed.push(t);
        self.j = j;
        Ok(report)
    }

    /// [`observe`](Self::observe) followed, once more than `2β` triplets have
    /// been seen, by `β − 1` steps on triplets resampled uniformly with
    /// replacement from everything observed so far.
    pub fn observe_with_replay(&mut self, t: Triplet) -> Result<Vec<UpdateReport>> {
        let passes = self.config.passes;
        let mut reports = Vec::with_capacity(passes);
        reports.push(self.observe(t)?);
        if self.j > 2 * passes as u64 {
            for k in 1..passes {
                let pick = self.rng.random_range(0..self.observed.len());
                let replay = self.observed[pick];
                reports.push(self.step(replay, self.j + k as u64, false)?);
            }
        }
        Ok(reports)
    }

    fn step(&mut self, t: Triplet, j: u64, fresh: bool) -> Result<UpdateReport> {
        let margin = self.kernel.margin_unchecked(&t);
        let delta = self.config.policy.step_from_margin(margin, j);
        let gamma = if self.config.policy.is_passive_aggressive() {
            delta
        } else {
            delta * self.config.model.weight_from_margin(margin)
        };
        if !gamma.is_finite() {
            return Err(Error::NonFinite("step magnitude"));
        }

        let mut report = UpdateReport {
            triplet: t,
            gamma,
            fresh,
            eig_computed: false,
            projected: false,
            skipped: false,
            eig_lower_bound: self.kernel.eig_lower_bound(),
        };
        if gamma == 0.0 {
            self.stats.passive += 1;
            return Ok(report);
        }

        self.kernel.apply_gradient_step_unchecked(&t, gamma);
        self.stats.updates += 1;
        if self.kernel.eig_lower_bound() < 0.0 {
            let outcome = project_psd_rank1(&mut self.kernel, self.config.eig_tol)?;
            self.stats.eig_computations += 1;
            report.eig_computed = true;
            if outcome.applied {
                self.stats.projections_applied += 1;
                report.projected = true;
            }
        } else {
            self.stats.skipped += 1;
            report.skipped = true;
        }
        report.eig_lower_bound = self.kernel.eig_lower_bound();
        Ok(report)
    }
}
