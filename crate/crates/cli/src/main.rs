mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "nnssgd",
    version,
    about = "Nuclear-norm regularized matrix completion with low-rank stochastic subgradient descent"
)]
struct Cli {
    /// Worker threads for the numeric kernels.
    #[arg(long, global = true, env = "NNSSGD_THREADS")]
    threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model to a ratings file.
    Train(TrainArgs),
    /// Predict ratings for user/item pairs.
    Predict(PredictArgs),
    /// Report the RMSE of a model on a ratings file.
    Eval(EvalArgs),
    /// Write a random low-rank completion problem.
    Synth(SynthArgs),
    /// Time single solver iterations for several row counts.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum ProbeArg {
    Columns,
    Rademacher,
    Gaussian,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum LossArg {
    Squared,
    Absolute,
    Hinge,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum SelectArg {
    Final,
    Best,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum SeparatorArg {
    Auto,
    Tab,
    Comma,
    Colons,
    Space,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Rank cap r.
    #[arg(long, default_value_t = 10)]
    rank: usize,
    /// Number of super-iterations; each is ceil(n/r) iterations.
    #[arg(long, default_value_t = 10)]
    super_iters: usize,
    /// Normalized regularization.
    #[arg(long, default_value_t = 0.015)]
    delta: f64,
    /// Normalized step size.
    #[arg(long, default_value_t = 0.005)]
    nu: f64,
    /// Probe width (defaults to the rank).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ProbeArg::Columns)]
    probe: ProbeArg,
    #[arg(long, value_enum, default_value_t = LossArg::Squared)]
    loss: LossArg,
    /// Restrict residuals to observed cells.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    masked: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.nnsvd")]
    model_out: PathBuf,
    /// Metrics CSV, one row per super-iteration.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Skip subtracting row and column means.
    #[arg(long)]
    no_center: bool,
    /// Which iterate becomes the model.
    #[arg(long, value_enum, default_value_t = SelectArg::Final)]
    select: SelectArg,
    /// Apply the column-sampling scale only once per step.
    #[arg(long)]
    single_scale: bool,
    /// Leave wall_seconds empty so metrics files are reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Keep the last of duplicate ratings instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long, value_enum, default_value_t = SeparatorArg::Auto)]
    separator: SeparatorArg,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["pairs", "all"])))]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// File of "user item" lines.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Predict every cell of the model.
    #[arg(long)]
    all: bool,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = SeparatorArg::Auto)]
    separator: SeparatorArg,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated row counts.
    #[arg(long, value_delimiter = ',', required = true)]
    m_list: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    rank: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use nnssgd::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidArgument(_) => 2,
                E::NumericalFailure { .. } => 4,
                E::Parse { .. } | E::Data(_) | E::Format(_) | E::Io(_) => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
