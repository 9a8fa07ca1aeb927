//! Projected-gradient batch solves, once on the whole set and then as a
//! mini-batch schedule with warm starts.

use rckl::batch::minibatch_run;
use rckl::data::{all_queries, answer_all, gen_points};
use rckl::harness::normalized_error;
use rckl::{solve_batch, BatchConfig, LossModel};

fn main() -> rckl::Result<()> {
    let n = 25;
    let cloud = gen_points(n, 2, 5)?;
    let triplets = answer_all(&cloud, all_queries(n))?;

    let config = BatchConfig::new(LossModel::Gnmds, 0.01, 0.05).with_max_iters(300);
    let sol = solve_batch(&config, &triplets, n)?;
    println!(
        "full solve: {} iterations, objective {:.3} -> {:.3}, error {:.4}, converged {}",
        sol.iterations,
        sol.initial_objective,
        sol.objective,
        normalized_error(&sol.kernel, &triplets)?,
        sol.converged
    );

    let stream = &triplets[..1500];
    minibatch_run(stream, 300, &config, n, true, |end, sol| {
        println!(
            "prefix {:>5}: {:>4} iterations, error on all triplets {:.4}",
            end,
            sol.iterations,
            normalized_error(&sol.kernel, &triplets)?
        );
        Ok(())
    })?;
    Ok(())
}
