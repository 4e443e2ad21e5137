use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "hmvr",
    version,
    about = "Hierarchical multi-vector image retrieval"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted synthetic container and query file.
    Synth(SynthArgs),
    /// Check a container (and optionally a query file) and print a summary.
    Validate(ValidateArgs),
    /// Retrieve the top K images for every query, as JSON lines.
    Query(QueryArgs),
    /// Score a labelled query set.
    Eval(EvalArgs),
    /// Per-level diagnostics with pruning and early exit off.
    Profile(ProfileArgs),
    /// Search level sets and schedule parameters under latency budgets.
    Autotune(AutotuneArgs),
    /// Measure throughput and scheduling overhead.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    #[value(name = "flat_mvr", alias = "flat-mvr")]
    FlatMvr,
    Hierarchical,
}

/// A tau value: a number or `disabled`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauArg(pub Option<f64>);

fn parse_tau(s: &str) -> Result<TauArg, String> {
    if s == "disabled" {
        return Ok(TauArg(None));
    }
    s.parse::<f64>()
        .map(|v| TauArg(Some(v)))
        .map_err(|_| format!("expected a number or \"disabled\", got {s:?}"))
}

#[derive(Debug, Args)]
pub struct SchedulerArgs {
    /// JSON config file, or an autotune table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Budget used to pick an entry from an autotune table.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Segment counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Initial reduction ratio.
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Early-exit threshold, or `disabled`.
    #[arg(long, value_parser = parse_tau)]
    pub tau: Option<TauArg>,
    /// Score every image at every level.
    #[arg(long)]
    pub no_prune: bool,
    /// Never stop before the last level.
    #[arg(long)]
    pub no_exit: bool,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Container directory.
    #[arg(long)]
    pub index: PathBuf,
    /// Query file (JSON lines).
    #[arg(long)]
    pub queries: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator spec; defaults apply to missing fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Container directory to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Query file to write.
    #[arg(long)]
    pub queries: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub container: PathBuf,
    #[arg(long)]
    pub queries: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    /// Write results here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    /// Include per-level diagnostics in the report.
    #[arg(long)]
    pub diagnostics: bool,
    #[arg(long)]
    pub diag_sample: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    #[arg(long)]
    pub diag_sample: Option<usize>,
    /// Per-level CSV table.
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AutotuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    /// JSON search ranges; overrides `ranges` from the config file.
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    /// Latency budgets, comma separated, ascending.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
