//! A small benchmark: online and mini-batch methods over three trials,
//! written to a directory and summarised with confidence intervals.

use rckl::harness::{
    aggregate, read_metrics, run_to_dir, write_aggregate, DatasetSpec, ExperimentConfig,
    MethodSpec, Sampling,
};
use rckl::{LossModel, StepPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rckl-example-run"));
    let config = ExperimentConfig {
        name: "example".into(),
        dataset: DatasetSpec::Synthetic {
            n: 30,
            d: 2,
            train: 1200,
            val: 200,
            test: Some(500),
            sampling: Sampling::Random,
            point_seed: None,
        },
        methods: vec![
            MethodSpec::Erkle {
                label: None,
                model: LossModel::Gnmds,
                policy: StepPolicy::PaGnmds,
                passes: 1,
            },
            MethodSpec::Erkle {
                label: Some("pa-gnmds x4".into()),
                model: LossModel::Gnmds,
                policy: StepPolicy::PaGnmds,
                passes: 4,
            },
            MethodSpec::Batch {
                label: None,
                model: LossModel::Gnmds,
                minibatch: 400,
                tau_grid: vec![0.01, 0.1, 1.0],
                delta_grid: vec![0.05],
                max_iters: 200,
                obj_tol: 1e-7,
                warm_start: true,
            },
        ],
        eval_every: 200,
        seeds: vec![1, 2, 3],
        track_rank: true,
        rank_rel_tol: 1e-6,
    };
    let outputs = run_to_dir(&config, &out)?;
    println!("wrote {} and {}", outputs.metrics_csv.display(), outputs.manifest_json.display());

    let rows = read_metrics(&outputs.metrics_csv)?;
    let summary = aggregate(&rows)?;
    write_aggregate(std::io::stdout().lock(), &summary)?;
    Ok(())
}
