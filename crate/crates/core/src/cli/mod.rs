//! Command-line interface of the `vsgd` binary.
//!
//! Flags override an optional `--config` file, which overrides per-command
//! defaults. Every run writes `manifest.txt` next to its outputs; feeding it
//! back through `--config` reproduces the run.

mod execute;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use execute::execute;
pub use manifest::{Command, Format, RunManifest};

use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "vsgd", version, about = "Adaptive-learning-rate SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Run the synthetic test grid and write trials.csv plus heatmaps.
    RunGrid(Flags),
    /// Simulate minibatch parallelization gains and write gains.csv.
    GainSim(Flags),
    /// Aggregate one two-cluster minibatch three ways and write reweight.csv.
    ReweightDemo(Flags),
    /// Run one optimizer on one problem and write its trajectory.
    SingleRun(Flags),
}

#[derive(Debug, Args, Default)]
struct Flags {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per grid cell (draws for reweight-demo).
    #[arg(long)]
    trials: Option<usize>,
    /// Updates per trial.
    #[arg(long)]
    updates: Option<u64>,
    /// Minibatch sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Subset of quad,abs,rectlin,gauss.
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    /// Loss scales A.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    curvatures: Option<Vec<f64>>,
    /// Noise variances σ².
    #[arg(long = "noise-vars", value_delimiter = ',', allow_negative_numbers = true)]
    noise_vars: Option<Vec<f64>>,
    /// Subset of sgd,adagrad,natural,vsgd,vsgd-fd.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<String>>,
    /// Initial learning rates of the baselines.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    eta0: Option<Vec<f64>>,
    /// SGD decay exponent (single-run).
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Initial parameter.
    #[arg(long, allow_negative_numbers = true)]
    theta0: Option<f64>,
    /// Probability that a sample gradient is non-zero (gain-sim).
    #[arg(long, allow_negative_numbers = true)]
    pnz: Option<f64>,
    /// Noise standard deviation (gain-sim).
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Repetitions per minibatch size (gain-sim).
    #[arg(long)]
    reps: Option<usize>,
    /// Minibatch steps per repetition (gain-sim).
    #[arg(long)]
    horizon: Option<usize>,
    /// Subset of instance,global,fixed (gain-sim).
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Heatmap image formats; CSV data is always written.
    #[arg(long, value_delimiter = ',', value_enum)]
    format: Option<Vec<Format>>,
    /// key=value file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Parses `argv` (including the program name) into a validated manifest.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunManifest, ParseError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseError::Usage)?;
    let (command, flags) = match cli.command {
        CommandArgs::RunGrid(f) => (Command::RunGrid, f),
        CommandArgs::GainSim(f) => (Command::GainSim, f),
        CommandArgs::ReweightDemo(f) => (Command::ReweightDemo, f),
        CommandArgs::SingleRun(f) => (Command::SingleRun, f),
    };
    build(command, flags).map_err(ParseError::Invalid)
}

fn build(command: Command, f: Flags) -> Result<RunManifest> {
    let mut m = RunManifest::defaults(command);
    if let Some(path) = &f.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        m.apply_text(&text)?;
    }
    let mut set = |k: &str, v: Option<String>| -> Result<()> {
        match v {
            Some(v) => m.apply(k, &v),
            None => Ok(()),
        }
    };
    set("seed", f.seed.map(|v| v.to_string()))?;
    set("trials", f.trials.map(|v| v.to_string()))?;
    set("updates", f.updates.map(|v| v.to_string()))?;
    set("n", f.n.as_deref().map(join))?;
    set("functions", f.functions.as_deref().map(|v| v.join(",")))?;
    set("curvatures", f.curvatures.as_deref().map(join))?;
    set("noise-vars", f.noise_vars.as_deref().map(join))?;
    set("algos", f.algos.as_deref().map(|v| v.join(",")))?;
    set("eta0", f.eta0.as_deref().map(join))?;
    set("gamma", f.gamma.map(|v| v.to_string()))?;
    set("theta0", f.theta0.map(|v| v.to_string()))?;
    set("pnz", f.pnz.map(|v| v.to_string()))?;
    set("sigma", f.sigma.map(|v| v.to_string()))?;
    set("reps", f.reps.map(|v| v.to_string()))?;
    set("horizon", f.horizon.map(|v| v.to_string()))?;
    set("modes", f.modes.as_deref().map(|v| v.join(",")))?;
    set("out", f.out.map(|p| p.to_string_lossy().into_owned()))?;
    set("workers", f.workers.map(|v| v.to_string()))?;
    set("format", f.format.as_deref().map(|v| v.iter().map(|x| x.name()).collect::<Vec<_>>().join(",")))?;
    m.validate()?;
    Ok(m)
}

#[derive(Debug)]
pub enum ParseError {
    /// Unknown flag, malformed value, `--help` or `--version`.
    Usage(clap::Error),
    /// Well-formed flags with out-of-range values.
    Invalid(Error),
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseError::Usage(e) => write!(f, "{e}"),
            ParseError::Invalid(e) => write!(f, "error: {e}"),
        }
    }
}

impl std::error::Error for ParseError {}

/// Entry point of the binary. Returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let manifest = match parse_args(argv) {
        Ok(m) => m,
        Err(ParseError::Usage(e)) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    match execute(&manifest) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
