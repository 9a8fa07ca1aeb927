use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rckl::data::{
    all_queries, answer_all, convert_table, gen_points, sample_queries, write_triplets, TableFormat,
};
use rckl::harness::{
    aggregate, log_grid, read_metrics, run_to_dir, write_aggregate, DatasetSpec, ExperimentConfig,
    MethodSpec, Sampling,
};
use rckl::{LossModel, StepPolicy};
use rckl_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "rckl", version, about = "Relative-comparison kernel learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian point cloud and oracle-answered triplets.
    Gen(GenArgs),
    /// Run an experiment and write metrics.csv and manifest.json.
    Run(RunArgs),
    /// Summarise metrics across trials with 95% intervals.
    Aggregate(AggregateArgs),
    /// Convert an external comparison table into the triplet file format.
    Convert(ConvertArgs),
    /// Serve live labeling sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    All,
    Random,
}

impl From<SamplingArg> for Sampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::All => Sampling::All,
            SamplingArg::Random => Sampling::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gnmds,
    Ste,
}

impl From<ModelArg> for LossModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gnmds => LossModel::Gnmds,
            ModelArg::Ste => LossModel::Ste,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "random")]
    sampling: SamplingArg,
    /// Number of random queries (ignored with `--sampling all`).
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Triplet file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the point cloud as CSV.
    #[arg(long)]
    points: Option<PathBuf>,
}

/// Comma-separated numbers, or `log:<lo>:<hi>:<count>`.
#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    parse_values(s).map(Grid)
}

fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected log:<lo>:<hi>:<count>, got {s:?}"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| format!("bad lower end {:?}", parts[0]))?;
        let hi: f64 = parts[1].parse().map_err(|_| format!("bad upper end {:?}", parts[1]))?;
        let count: usize = parts[2].parse().map_err(|_| format!("bad count {:?}", parts[2]))?;
        if !(lo > 0.0 && hi >= lo && count >= 1) {
            return Err(format!("invalid log grid {s:?}"));
        }
        return Ok(log_grid(lo, hi, count));
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad grid value {x:?}")))
        .collect()
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Trial seeds, comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Number of trials; with one `--seed s` runs seeds s, s+1, ...
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    name: Option<String>,

    /// Triplet file to use instead of synthetic data.
    #[arg(long, conflicts_with_all = ["n", "d"])]
    data: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum, default_value = "random")]
    sampling: SamplingArg,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long, default_value_t = 0)]
    val: usize,
    /// Test triplets; all remaining ones when omitted (file or `--sampling all`).
    #[arg(long)]
    test: Option<usize>,

    /// Online step policies, e.g. `pa-gnmds`, `pa-ste:0.9`, `inv-sqrt-j:0.5`.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<StepPolicy>,
    /// Loss model for schedule policies and batch solves.
    #[arg(long, value_enum, default_value = "gnmds")]
    model: ModelArg,
    /// Passes per arriving triplet (1 = no replay).
    #[arg(long, default_value_t = 1)]
    beta: usize,
    /// Add a batch baseline re-solved every this many triplets.
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long, value_parser = parse_grid, default_value = "log:0.001:100:6")]
    tau_grid: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0.01")]
    delta_grid: Grid,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long)]
    warm_start: bool,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Skip the kernel rank column (saves one eigendecomposition per row).
    #[arg(long)]
    no_rank: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig {
                name: "experiment".into(),
                dataset: self.dataset()?,
                methods: Vec::new(),
                eval_every: 100,
                seeds: vec![0],
                track_rank: true,
                rank_rel_tol: 1e-6,
            },
        };
        if self.config.is_some() && (self.data.is_some() || self.n.is_some()) {
            cfg.dataset = self.dataset()?;
        }
        let model = LossModel::from(self.model);
        for policy in &self.policy {
            cfg.methods.push(MethodSpec::Erkle {
                label: None,
                model: match policy {
                    StepPolicy::PaSte { .. } => LossModel::Ste,
                    StepPolicy::PaGnmds => LossModel::Gnmds,
                    _ => model,
                },
                policy: *policy,
                passes: self.beta,
            });
        }
        if let Some(m) = self.minibatch {
            cfg.methods.push(MethodSpec::Batch {
                label: None,
                model,
                minibatch: m,
                tau_grid: self.tau_grid.0.clone(),
                delta_grid: self.delta_grid.0.clone(),
                max_iters: self.max_iters,
                obj_tol: 1e-7,
                warm_start: self.warm_start,
            });
        }
        if let Some(name) = &self.name {
            cfg.name = name.clone();
        }
        if let Some(e) = self.eval_every {
            cfg.eval_every = e;
        }
        if self.no_rank {
            cfg.track_rank = false;
        }
        match (self.seed.as_slice(), self.trials) {
            ([], Some(t)) => cfg.seeds = (0..t as u64).collect(),
            ([s], Some(t)) => cfg.seeds = (0..t as u64).map(|i| s + i).collect(),
            (seeds, Some(_)) if !seeds.is_empty() => bail!("--trials needs at most one --seed"),
            ([], None) => {}
            (seeds, _) => cfg.seeds = seeds.to_vec(),
        }
        if cfg.methods.is_empty() {
            bail!("no methods: pass --policy and/or --minibatch, or a --config with methods");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dataset(&self) -> Result<DatasetSpec> {
        let train = self.train.context("--train is required without a config")?;
        if let Some(path) = &self.data {
            return Ok(DatasetSpec::File {
                path: path.clone(),
                train,
                val: self.val,
                test: self.test,
            });
        }
        let (Some(n), Some(d)) = (self.n, self.d) else {
            bail!("give either --data FILE or both --n and --d");
        };
        Ok(DatasetSpec::Synthetic {
            n,
            d,
            train,
            val: self.val,
            test: self.test,
            sampling: self.sampling.into(),
            point_seed: None,
        })
    }
}

#[derive(Args)]
struct AggregateArgs {
    /// metrics.csv files to pool.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    /// Triplet file to write.
    #[arg(long)]
    out: PathBuf,
    /// Field separator: a single character, or `tab`.
    #[arg(long, default_value = ",")]
    delimiter: String,
    #[arg(long)]
    header: bool,
    /// Columns holding anchor, closer and farther item.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    columns: Vec<usize>,
    #[arg(long)]
    one_based: bool,
    /// Fields are item names rather than indices.
    #[arg(long)]
    labels: bool,
    /// Where to write the name of each index (with `--labels`).
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Persist sessions in this directory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Serve files from this directory next to the API.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn gen(args: GenArgs) -> Result<()> {
    let cloud = gen_points(args.n, args.d, args.seed)?;
    let rows = match args.sampling {
        SamplingArg::All => answer_all(&cloud, all_queries(args.n))?,
        SamplingArg::Random => answer_all(&cloud, sample_queries(args.n, args.count, args.seed)?)?,
    };
    let mut w = create(&args.out)?;
    write_triplets(&mut w, args.n, &rows)?;
    w.flush()?;
    if let Some(p) = &args.points {
        let mut w = create(p)?;
        cloud.write_csv(&mut w)?;
        w.flush()?;
    }
    eprintln!("wrote {} triplets over {} objects to {}", rows.len(), args.n, args.out.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.config()?;
    eprintln!(
        "running {:?}: {} method(s) x {} trial(s)",
        cfg.name,
        cfg.methods.len(),
        cfg.trials()
    );
    let out = run_to_dir(&cfg, &args.out)?;
    for s in &out.manifest.selections {
        eprintln!(
            "  {} trial {}: tau={} delta={} (validation error {:.4})",
            s.method, s.trial, s.tau, s.delta, s.val_error
        );
    }
    eprintln!(
        "wrote {} rows to {} and {}",
        out.manifest.rows_written,
        out.metrics_csv.display(),
        out.manifest_json.display()
    );
    Ok(())
}

fn aggregate_cmd(args: AggregateArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &args.inputs {
        rows.extend(read_metrics(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let summary = aggregate(&rows)?;
    match &args.out {
        Some(p) => {
            let mut w = create(p)?;
            write_aggregate(&mut w, &summary)?;
            w.flush()?;
        }
        None => write_aggregate(io::stdout().lock(), &summary)?,
    }
    Ok(())
}

fn convert(args: ConvertArgs) -> Result<()> {
    let delimiter = match args.delimiter.as_str() {
        "tab" | "\\t" => b'\t',
        s if s.len() == 1 => s.as_bytes()[0],
        s => bail!("delimiter must be one character or `tab`, got {s:?}"),
    };
    let columns: [usize; 3] = args
        .columns
        .as_slice()
        .try_into()
        .map_err(|_| anyhow::anyhow!("--columns needs exactly three positions"))?;
    let format = TableFormat {
        delimiter,
        has_header: args.header,
        columns,
        one_based: args.one_based,
        labels: args.labels,
    };
    let input = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let table = convert_table(io::BufReader::new(input), &format)?;
    let mut w = create(&args.out)?;
    write_triplets(&mut w, table.file.n_declared, &table.file.rows)?;
    w.flush()?;
    if let (Some(labels), Some(path)) = (&table.labels, &args.labels_out) {
        let mut w = create(path)?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(w, "{i}\t{l}")?;
        }
        w.flush()?;
    }
    eprintln!(
        "converted {} comparisons over {} objects",
        table.file.rows.len(),
        table.file.n_declared
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(rckl_service::serve(ServiceConfig {
        addr: args.addr,
        data_dir: args.data_dir,
        static_dir: args.static_dir,
    }))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Aggregate(a) => aggregate_cmd(a),
        Command::Convert(a) => convert(a),
        Command::Serve(a) => serve(a),
    }
}
