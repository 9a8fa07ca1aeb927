//! Learn a kernel from a stream of oracle-answered triplets and watch the
//! held-out error fall.

use rckl::data::{answer_all, gen_points, sample_queries, split};
use rckl::harness::normalized_error;
use rckl::{LearnerConfig, LossModel, OnlineLearner, StepPolicy};

fn main() -> rckl::Result<()> {
    let (n, d) = (60, 3);
    let cloud = gen_points(n, d, 1)?;
    let queries = sample_queries(n, 6000, 2)?;
    let triplets = answer_all(&cloud, queries)?;
    let parts = split(&triplets, 5000, 0, Some(1000), 3)?;

    let config = LearnerConfig::new(n, LossModel::Gnmds, StepPolicy::PaGnmds)
        .with_passes(3)
        .with_seed(4);
    let mut learner = OnlineLearner::new(config)?;

    println!("{:>8} {:>10} {:>10}", "seen", "train", "test");
    for (j, t) in parts.train.iter().enumerate() {
        learner.observe_with_replay(*t)?;
        if (j + 1) % 500 == 0 {
            let seen = &parts.train[..=j];
            println!(
                "{:>8} {:>10.4} {:>10.4}",
                j + 1,
                normalized_error(learner.kernel(), seen)?,
                normalized_error(learner.kernel(), &parts.test)?
            );
        }
    }
    println!("min eigenvalue of the learned kernel: {:.3e}", learner.kernel().min_eigenvalue()?);
    Ok(())
}
