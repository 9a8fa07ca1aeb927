//! How often each step policy needs an eigensolve to stay PSD.

use rckl::data::{answer_all, gen_points, sample_queries};
use rckl::{LearnerConfig, LossModel, OnlineLearner, StepPolicy};

fn main() -> rckl::Result<()> {
    let n = 150;
    let cloud = gen_points(n, 10, 11)?;
    let stream = answer_all(&cloud, sample_queries(n, 3000, 12)?)?;

    let runs = [
        (LossModel::Gnmds, StepPolicy::PaGnmds),
        (LossModel::Ste, StepPolicy::PaSte { p: 0.9 }),
        (LossModel::Gnmds, StepPolicy::InverseSqrtJ { delta0: 0.5 }),
        (LossModel::Gnmds, StepPolicy::Constant { delta: 0.01 }),
    ];
    println!("{:<22} {:>8} {:>8} {:>8} {:>10} {:>10}", "policy", "updates", "passive", "skipped", "eigsolves", "projected");
    for (model, policy) in runs {
        let mut learner = OnlineLearner::new(LearnerConfig::new(n, model, policy))?;
        for t in &stream {
            learner.observe(*t)?;
        }
        let s = learner.stats();
        println!(
            "{:<22} {:>8} {:>8} {:>8} {:>10} {:>10}",
            policy.label(),
            s.updates,
            s.passive,
            s.skipped,
            s.eig_computations,
            s.projections_applied
        );
    }
    Ok(())
}
