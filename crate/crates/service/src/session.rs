use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rckl::data::random_query;
use rckl::harness::normalized_error;
use rckl::linalg::{top_k_eigenpairs, DEFAULT_EIG_TOL};
use rckl::online::{LearnerState, ProjectionStats};
use rckl::{Kernel, LearnerConfig, LossModel, OnlineLearner, Query, StepPolicy, Triplet, UpdateReport};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const DEFAULT_CHECKPOINT_EVERY: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionObject {
    pub index: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_url: Option<String>,
}

/// Learner and selector parameters fixed at creation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub model: LossModel,
    pub policy: StepPolicy,
    pub passes: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            model: LossModel::Gnmds,
            policy: StepPolicy::PaGnmds,
            passes: 1,
            seed: 0,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
        }
    }
}

impl SessionSettings {
    fn learner_config(&self, n: usize) -> LearnerConfig {
        LearnerConfig::new(n, self.model, self.policy)
            .with_passes(self.passes)
            .with_seed(self.seed)
    }
}

/// The immutable part of a session, stored as `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub objects: Vec<SessionObject>,
    pub settings: SessionSettings,
    pub created_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub query_id: u64,
    pub head: usize,
    pub options: [usize; 2],
}

impl PendingQuery {
    fn query(&self) -> Query {
        Query {
            head: self.head,
            options: self.options,
        }
    }
}

/// One line of the append-only answer log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query_id: u64,
    pub head: usize,
    pub chosen: usize,
    pub other: usize,
}

impl AnswerRecord {
    pub fn triplet(&self) -> Triplet {
        Triplet {
            a: self.head,
            b: self.chosen,
            c: self.other,
        }
    }
}

/// Learner state written next to the kernel checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointState {
    pub answers: usize,
    pub learner: LearnerState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    /// Report for the submitted triplet itself.
    #[serde(flatten)]
    pub report: UpdateReport,
    pub replay_steps: usize,
    pub answers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub answers: usize,
    /// `None` until the first answer arrives.
    pub train_error_over_log: Option<f64>,
    pub projection: ProjectionStats,
    pub eig_lower_bound: f64,
    pub objects: usize,
    pub updated_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub index: usize,
    pub label: String,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub k: usize,
    /// Eigenvalues behind each axis, largest first, clipped at zero.
    pub axis_weights: Vec<f64>,
    pub points: Vec<EmbeddingPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub answers: usize,
    pub updated_at: u64,
}

pub(crate) fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// A live labeling session: learner, answer log and the pending query.
#[derive(Debug)]
pub struct Session {
    meta: SessionMeta,
    learner: OnlineLearner,
    answers: Vec<AnswerRecord>,
    pending: Option<PendingQuery>,
    updated_at: u64,
}

impl Session {
    pub fn new(meta: SessionMeta) -> Result<Self> {
        let n = meta.objects.len();
        if n < 3 {
            return Err(ServiceError::TooFewObjects(n));
        }
        if meta.settings.checkpoint_every == 0 {
            return Err(ServiceError::InvalidRequest(
                "checkpoint_every must be at least 1".into(),
            ));
        }
        let learner = OnlineLearner::new(meta.settings.learner_config(n))?;
        Ok(Self {
            updated_at: meta.created_at,
            meta,
            learner,
            answers: Vec::new(),
            pending: None,
        })
    }

    /// Rebuilds a session from its log, starting from a checkpoint when one
    /// is available and replaying the answers recorded after it.
    pub fn recover(
        meta: SessionMeta,
        answers: Vec<AnswerRecord>,
        checkpoint: Option<(Kernel, CheckpointState)>,
    ) -> Result<Self> {
        let mut session = Self::new(meta)?;
        let start = match checkpoint {
            Some((kernel, state)) => {
                if state.answers > answers.len() {
                    return Err(ServiceError::Storage(format!(
                        "checkpoint covers {} answers but the log holds {}",
                        state.answers,
                        answers.len()
                    )));
                }
                let observed = answers[..state.answers].iter().map(|a| a.triplet()).collect();
                let config = session.meta.settings.learner_config(session.n());
                session.learner = OnlineLearner::resume(config, kernel, observed, state.learner)?;
                state.answers
            }
            None => 0,
        };
        for a in &answers[start..] {
            session.learner.observe_with_replay(a.triplet())?;
        }
        session.answers = answers;
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn n(&self) -> usize {
        self.meta.objects.len()
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn answers(&self) -> &[AnswerRecord] {
        &self.answers
    }

    pub fn pending(&self) -> Option<PendingQuery> {
        self.pending
    }

    pub fn kernel(&self) -> &Kernel {
        self.learner.kernel()
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            meta: self.meta.clone(),
            answers: self.answers.len(),
            updated_at: self.updated_at,
        }
    }

    pub fn checkpoint_state(&self) -> CheckpointState {
        CheckpointState {
            answers: self.answers.len(),
            learner: self.learner.state(),
        }
    }

    /// The pending query, or a fresh one if nothing is pending.
    ///
    /// Query `k` (the `k`-th one issued, counting from zero) is drawn from
    /// stream `k + 1` of the session seed, so the sequence depends only on
    /// the seed and the answers given.
    pub fn next_query(&mut self) -> PendingQuery {
        if let Some(p) = self.pending {
            return p;
        }
        let query_id = self.answers.len() as u64;
        let previous = self.answers.last().map(|a| {
            Query {
                head: a.head,
                options: [a.chosen, a.other],
            }
            .canonical()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(self.meta.settings.seed);
        rng.set_stream(query_id + 1);
        let q = loop {
            let q = random_query(&mut rng, self.n());
            if Some(q) != previous {
                break q;
            }
        };
        let pending = PendingQuery {
            query_id,
            head: q.head,
            options: q.options,
        };
        self.pending = Some(pending);
        pending
    }

    pub fn submit_answer(&mut self, query_id: u64, chosen: usize) -> Result<(AnswerRecord, AnswerOutcome)> {
        let pending = match self.pending {
            Some(p) if p.query_id == query_id => p,
            other => {
                return Err(ServiceError::StaleQuery {
                    got: query_id,
                    pending: other.map(|p| p.query_id),
                })
            }
        };
        if !pending.options.contains(&chosen) {
            return Err(ServiceError::InvalidChoice {
                chosen,
                options: pending.options,
            });
        }
        let triplet = pending.query().answer(chosen)?;
        let reports = self.learner.observe_with_replay(triplet)?;
        let record = AnswerRecord {
            query_id,
            head: triplet.a,
            chosen: triplet.b,
            other: triplet.c,
        };
        self.answers.push(record);
        self.pending = None;
        self.updated_at = now_secs();
        let outcome = AnswerOutcome {
            report: reports[0],
            replay_steps: reports.len() - 1,
            answers: self.answers.len(),
        };
        Ok((record, outcome))
    }

    /// Whether the answer count just reached a checkpoint boundary.
    pub fn checkpoint_due(&self) -> bool {
        !self.answers.is_empty() && self.answers.len() % self.meta.settings.checkpoint_every == 0
    }

    pub fn stats(&self) -> Result<SessionStats> {
        let train_error_over_log = if self.answers.is_empty() {
            None
        } else {
            let log: Vec<Triplet> = self.answers.iter().map(|a| a.triplet()).collect();
            Some(normalized_error(self.kernel(), &log)?)
        };
        Ok(SessionStats {
            answers: self.answers.len(),
            train_error_over_log,
            projection: *self.learner.stats(),
            eig_lower_bound: self.kernel().eig_lower_bound(),
            objects: self.n(),
            updated_at: self.updated_at,
        })
    }

    pub fn embedding(&self, k: usize) -> Result<Embedding> {
        embedding_of(self.kernel(), &self.meta.objects, k)
    }
}

/// Coordinates `√λᵢ vᵢ` from the top `k` eigenpairs of the kernel.
pub fn embedding_of(kernel: &Kernel, objects: &[SessionObject], k: usize) -> Result<Embedding> {
    let n = kernel.n();
    if k == 0 || k > n {
        return Err(ServiceError::InvalidRequest(format!(
            "embedding dimension must lie in 1..={n}, got {k}"
        )));
    }
    let pairs = top_k_eigenpairs(kernel.matrix(), k, DEFAULT_EIG_TOL)?;
    let weights: Vec<f64> = pairs.iter().map(|p| p.value.max(0.0)).collect();
    let points = objects
        .iter()
        .map(|o| EmbeddingPoint {
            index: o.index,
            label: o.label.clone(),
            coords: pairs
                .iter()
                .zip(&weights)
                .map(|(p, w)| w.sqrt() * p.vector[o.index])
                .collect(),
        })
        .collect();
    Ok(Embedding {
        k,
        axis_weights: weights,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: usize, seed: u64) -> SessionMeta {
        SessionMeta {
            id: "s".into(),
            objects: (0..n)
                .map(|i| SessionObject {
                    index: i,
                    label: format!("o{i}"),
                    media_url: None,
                })
                .collect(),
            settings: SessionSettings {
                seed,
                ..SessionSettings::default()
            },
            created_at: 0,
        }
    }

    #[test]
    fn rejects_small_sessions() {
        assert!(matches!(
            Session::new(meta(2, 0)),
            Err(ServiceError::TooFewObjects(2))
        ));
        let s = Session::new(meta(3, 0)).unwrap();
        assert_eq!(s.kernel().matrix().max_abs_diff(&rckl::SymMatrix::identity(3)), 0.0);
    }

    #[test]
    fn query_is_idempotent_until_answered() {
        let mut s = Session::new(meta(3, 9)).unwrap();
        let q = s.next_query();
        assert_eq!(s.next_query(), q);
        let mut ids = vec![q.head, q.options[0], q.options[1]];
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2]);
        s.submit_answer(q.query_id, q.options[1]).unwrap();
        assert!(matches!(
            s.submit_answer(q.query_id, q.options[1]),
            Err(ServiceError::StaleQuery { .. })
        ));
        let q2 = s.next_query();
        assert_ne!(
            Query { head: q2.head, options: q2.options },
            Query { head: q.head, options: q.options }
        );
    }

    #[test]
    fn first_pa_answer_takes_a_tenth_and_skips_projection() {
        let mut s = Session::new(meta(5, 1)).unwrap();
        let q = s.next_query();
        let (record, out) = s.submit_answer(q.query_id, q.options[0]).unwrap();
        assert_eq!(record.chosen, q.options[0]);
        assert!((out.report.gamma - 0.1).abs() < 1e-15);
        assert!(out.report.skipped && !out.report.eig_computed);
        let stats = s.stats().unwrap();
        assert_eq!(stats.answers, 1);
        assert_eq!(stats.train_error_over_log, Some(0.0));
    }

    #[test]
    fn invalid_choice_leaves_query_pending() {
        let mut s = Session::new(meta(4, 2)).unwrap();
        let q = s.next_query();
        let err = s.submit_answer(q.query_id, q.head).unwrap_err();
        assert!(matches!(err, ServiceError::InvalidChoice { .. }));
        assert_eq!(s.pending(), Some(q));
        assert_eq!(s.stats().unwrap().train_error_over_log, None);
    }

    #[test]
    fn full_embedding_reconstructs_kernel() {
        let mut s = Session::new(meta(6, 3)).unwrap();
        for i in 0..30 {
            let q = s.next_query();
            s.submit_answer(q.query_id, q.options[i % 2]).unwrap();
        }
        let e = s.embedding(6).unwrap();
        let k = s.kernel().matrix();
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = e.points[i].coords.iter().zip(&e.points[j].coords).map(|(a, b)| a * b).sum();
                assert!((dot - k.get(i, j)).abs() < 1e-6);
            }
        }
        assert!(s.embedding(7).is_err());
        assert!(s.embedding(0).is_err());
    }

    #[test]
    fn recovery_from_checkpoint_and_tail_is_exact() {
        let mut s = Session::new(meta(7, 4)).unwrap();
        let mut checkpoint = None;
        for i in 0..40 {
            let q = s.next_query();
            s.submit_answer(q.query_id, q.options[(i / 3) % 2]).unwrap();
            if i == 24 {
                checkpoint = Some((s.kernel().clone(), s.checkpoint_state()));
            }
        }
        let from_log = Session::recover(s.meta().clone(), s.answers().to_vec(), None).unwrap();
        let from_ckpt = Session::recover(s.meta().clone(), s.answers().to_vec(), checkpoint).unwrap();
        assert!(from_log.kernel().matrix().max_abs_diff(s.kernel().matrix()) <= 1e-12);
        assert!(from_ckpt.kernel().matrix().max_abs_diff(s.kernel().matrix()) <= 1e-12);
        let mut a = from_ckpt;
        assert_eq!(a.next_query(), s.next_query());
    }
}
