//! Online kernel learning from relative comparisons.
//!
//! A [`Kernel`] is a PSD similarity matrix over `n` objects. Each observed
//! [`Triplet`] `(a, b, c)` says `a` is closer to `b` than to `c`; the
//! [`OnlineLearner`] folds triplets in one at a time with `O(n²)` work,
//! keeping the kernel PSD through rank-1 projections that are skipped
//! whenever a maintained eigenvalue bound already certifies the result.
//!
//! ```
//! use rckl::{LearnerConfig, OnlineLearner, Triplet};
//!
//! let mut learner = OnlineLearner::new(LearnerConfig::passive_aggressive(4))?;
//! learner.observe(Triplet::new(0, 1, 2)?)?;
//! assert!(learner.kernel().satisfies(&Triplet::new(0, 1, 2)?)?);
//! # Ok::<(), rckl::Error>(())
//! ```

pub mod batch;
pub mod data;
mod error;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod online;
pub mod triplet;

pub use batch::{solve_batch, BatchConfig, BatchSolution};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use linalg::SymMatrix;
pub use loss::LossModel;
pub use online::{LearnerConfig, OnlineLearner, StepPolicy, UpdateReport};
pub use triplet::{Query, Triplet};
