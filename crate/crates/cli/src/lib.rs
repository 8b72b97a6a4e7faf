//! The `grnkan` command-line tool: simulate data, infer networks, score
//! them, cluster cells by their gradients, run the branching toy demo and
//! benchmark suites.
//!
//! Every command takes `--seed` (falling back to the `GRNKAN_SEED`
//! environment variable), `--workers` and an optional `--config` file of
//! `key = value` lines. Flags override the file, which overrides defaults.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grnkan::synth::{Branch, SimulationConfig};
use grnkan::trainer::TrainConfig;

pub use error::{CliError, CliResult};
use settings::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "grnkan", version, args_override_self = true)]
#[command(about = "Gene regulatory network inference with KAN gradients")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (default: $GRNKAN_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate expression data from a built-in or JSON network.
    Simulate(SimulateArgs),
    /// Train per-gene predictors and infer a signed adjacency matrix.
    Infer(InferArgs),
    /// Score a predicted network against a ground truth.
    Eval(EvalArgs),
    /// Cluster cells by gradients and infer one network per cluster.
    ClusterGrn(ClusterArgs),
    /// Compare the forest baseline and the KAN pipeline on the branching toy.
    ToyDemo(ToyArgs),
    /// Run a simulate/infer/eval suite and aggregate the metrics.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr", visible_alias = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
    #[arg(long)]
    pub gap_threshold: Option<f64>,
    #[arg(long)]
    pub gap_patience: Option<usize>,
    /// Keep the weights of the epoch with the lowest test loss.
    #[arg(long)]
    pub restore_best: bool,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub spline_order: Option<usize>,
    /// z-score cut-off for counting a cell towards an edge.
    #[arg(long)]
    pub z_threshold: Option<f64>,
}

impl TrainArgs {
    pub fn resolve(&self, file: &ConfigFile, seed: u64) -> CliResult<TrainConfig> {
        let d = TrainConfig::default();
        let mut cfg = TrainConfig {
            epochs: file.pick_or(self.epochs, "epochs", d.epochs)?,
            learning_rate: file.pick_or(self.learning_rate, "learning_rate", d.learning_rate)?,
            clip_norm: file.pick_or(self.clip_norm, "clip_norm", d.clip_norm)?,
            split_ratio: file.pick_or(self.split_ratio, "split_ratio", d.split_ratio)?,
            gap_threshold: file.pick_or(self.gap_threshold, "gap_threshold", d.gap_threshold)?,
            gap_patience: file.pick_or(self.gap_patience, "gap_patience", d.gap_patience)?,
            restore_best: self.restore_best
                || file.pick_or(None, "restore_best", d.restore_best)?,
            seed,
            ..d
        };
        cfg.kan.grid_size = file.pick_or(self.grid_size, "grid_size", cfg.kan.grid_size)?;
        cfg.kan.order = file.pick_or(self.spline_order, "spline_order", cfg.kan.order)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn z_threshold(&self, file: &ConfigFile) -> CliResult<f64> {
        let z = file.pick_or(self.z_threshold, "z_threshold", grnkan::grn::Z_THRESHOLD)?;
        if !z.is_finite() {
            return Err(CliError::Usage(format!("z threshold must be finite, got {z}")));
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub hill_n: Option<f64>,
    #[arg(long)]
    pub hill_k: Option<f64>,
    #[arg(long)]
    pub production: Option<f64>,
    #[arg(long)]
    pub degradation: Option<f64>,
    /// Langevin noise scale.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
}

impl SimArgs {
    pub fn resolve(&self, file: &ConfigFile, n_cells: usize, seed: u64) -> CliResult<SimulationConfig> {
        let d = SimulationConfig::default();
        let cfg = SimulationConfig {
            n_cells,
            t_max: file.pick_or(self.t_max, "t_max", d.t_max)?,
            dt: file.pick_or(self.dt, "dt", d.dt)?,
            hill_n: file.pick_or(self.hill_n, "hill_n", d.hill_n)?,
            hill_k: file.pick_or(self.hill_k, "hill_k", d.hill_k)?,
            production: file.pick_or(self.production, "production", d.production)?,
            degradation: file.pick_or(self.degradation, "degradation", d.degradation)?,
            noise: file.pick_or(self.noise, "noise", d.noise)?,
            init_scale: file.pick_or(self.init_scale, "init_scale", d.init_scale)?,
            sample_at_end: false,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Built-in name (LI, LL, CY, BF, BFC, TF, mCAD, VSC, HSC, GSD,
    /// chain:N), toy-red / toy-blue / toy-both, or a JSON network file.
    #[arg(long)]
    pub network: String,
    /// Number of cells (default 2000).
    #[arg(long)]
    pub cells: Option<usize>,
    /// Noise std of the toy dataset.
    #[arg(long)]
    pub toy_noise: Option<f64>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    /// Expression CSV, genes as rows.
    #[arg(long)]
    pub expr: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted network: dense matrix CSV or ranked edge list.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth `Gene1,Gene2,Type`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also report sign-aware metrics.
    #[arg(long)]
    pub signed: bool,
    /// Edge budget for SHD and FDR (default: number of true edges).
    #[arg(long)]
    pub k: Option<usize>,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub expr: PathBuf,
    /// Gradient long CSV from `infer`.
    #[arg(long)]
    pub grads: PathBuf,
    /// DBSCAN radius (default: median 4-NN distance).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub min_points: Option<usize>,
    #[arg(long)]
    pub z_threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ToyArgs {
    #[arg(long, value_parser = parse_branch)]
    pub branch: Branch,
    /// Cells per branch (default 500).
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub toy_noise: Option<f64>,
    /// Trees in the forest baseline (default 100).
    #[arg(long)]
    pub trees: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// CSV with columns `network,cells,seeds`; seeds separated by `;` or spaces.
    #[arg(long)]
    pub suite: PathBuf,
    /// Timed repetitions of every (network, cells, seed) entry.
    #[arg(long)]
    pub runs: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    s.parse().map_err(|e: grnkan::GrnError| e.to_string())
}

/// Settings shared by every command after flag/config resolution.
#[derive(Debug, Clone)]
pub struct Context {
    pub file: ConfigFile,
    pub seed: u64,
    pub workers: usize,
}

fn context(cli: &Cli) -> CliResult<Context> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = file.seed(cli.seed)?;
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers = file.pick_or(cli.workers, "workers", default_workers)?;
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    Ok(Context { file, seed, workers })
}

/// Runs a parsed command on a pool of `--workers` threads.
pub fn run(cli: Cli) -> CliResult<()> {
    let ctx = context(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", ctx.workers)))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => commands::simulate::run(a, &ctx),
        Command::Infer(a) => commands::infer::run(a, &ctx),
        Command::Eval(a) => commands::eval::run(a, &ctx),
        Command::ClusterGrn(a) => commands::cluster::run(a, &ctx),
        Command::ToyDemo(a) => commands::toy::run(a, &ctx),
        Command::Bench(a) => commands::bench::run(a, &ctx),
    })
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args`, runs the command and maps the outcome to an exit code:
/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
