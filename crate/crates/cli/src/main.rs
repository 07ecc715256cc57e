//! `gramor` command-line driver.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug, Serialize, Deserialize)]
#[command(
    name = "gramor",
    version,
    about = "Gramian-based model reduction with a-priori error bounds"
)]
pub struct Cli {
    /// Output directory (`generate-benchmark` also accepts a `.json` file path).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for Monte Carlo noise.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; affects speed only.
    #[arg(long, global = true, env = "GRAMOR_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize, Deserialize)]
pub enum Command {
    /// Write the boundary-controlled heat equation system as JSON.
    GenerateBenchmark(GenerateArgs),
    /// Reduce a system and write the reduced model and Gramian spectrum.
    Reduce(ReduceArgs),
    /// Evaluate error bounds for one reduced model or a sweep of orders.
    Bounds(BoundsArgs),
    /// Simulate full and reduced model and write the mean error curve.
    Simulate(SimulateArgs),
    /// Mean-square stability verdict for a system or reduced model file.
    StabilityCheck(StabilityArgs),
    /// Regenerate the benchmark tables and figure data.
    Reproduce(ReproduceArgs),
    /// Replay the command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Stochastic,
    Bilinear,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Os,
    Bt,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    General,
    Weighted,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Table1,
    Fig3,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Interior grid points per axis; the state dimension is k².
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "stochastic")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.8)]
    pub robin: f64,
    /// Scaling parameter stored with bilinear systems.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ReduceArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, value_enum, default_value = "os")]
    pub method: MethodArg,
    /// Reduced order.
    #[arg(long)]
    pub r: usize,
    /// Precomputed observability Gramian (JSON rows), e.g. from an earlier BT run.
    #[arg(long)]
    pub observability: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sweep {
    pub min: usize,
    pub max: usize,
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (a, b) = s.split_once(':').ok_or("expected RMIN:RMAX")?;
    let min: usize = a.trim().parse().map_err(|e| format!("bad RMIN: {e}"))?;
    let max: usize = b.trim().parse().map_err(|e| format!("bad RMAX: {e}"))?;
    if min == 0 || min > max {
        return Err(format!("need 1 <= RMIN <= RMAX, got {min}:{max}"));
    }
    Ok(Sweep { min, max })
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct InputArgs {
    /// Input signal: a registry name (damped-sine, unit, zero), `const:VALUE`
    /// or `table:FILE.csv`. One value drives every channel; otherwise give
    /// one per channel.
    #[arg(long = "input", default_value = "damped-sine")]
    pub input: Vec<String>,
    /// Time horizon (default 1 for stochastic, 10 for bilinear systems).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
#[command(group = clap::ArgGroup::new("which").required(true).args(["rom", "sweep"]))]
pub struct BoundsArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Reduced model file written by `reduce`.
    #[arg(long)]
    pub rom: Option<PathBuf>,
    /// Range of reduced orders, `RMIN:RMAX`.
    #[arg(long, value_parser = parse_sweep)]
    pub sweep: Option<Sweep>,
    /// Reduction method for sweeps.
    #[arg(long, value_enum, default_value = "os")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "general")]
    pub representation: Representation,
    #[arg(long)]
    pub observability: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub rom: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Monte Carlo samples (stochastic systems).
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Euler–Maruyama step size.
    #[arg(long, default_value_t = 1.0 / 256.0)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub rk_rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rk_atol: f64,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct StabilityArgs {
    #[arg(long)]
    pub system: PathBuf,
    /// Largest dimension handled by dense eigenvalues.
    #[arg(long)]
    pub dense_cutoff: Option<usize>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Monte Carlo samples for the table.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Reduced order for the table; largest order for the figure.
    #[arg(long, default_value_t = 25)]
    pub r: usize,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Argument-level failure (exit code 2) detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<gramor::Error>() {
            use gramor::Error::*;
            return match e {
                Dimension(_) | InvalidArgument(_) | Format(_) | Json(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads.filter(|&n| n > 0) {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::debug!("thread pool already configured");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the `parallel` feature; running sequentially");
    }
}

/// Parses and executes one command line (without the program name).
pub fn run(argv: Vec<String>) -> anyhow::Result<()> {
    let cli = match Cli::try_parse_from(
        std::iter::once("gramor".to_string()).chain(argv.iter().cloned()),
    ) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    configure_threads(cli.threads);
    commands::dispatch(cli, argv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
