mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "regid",
    version,
    about = "Regularized impulse response identification"
)]
struct Cli {
    /// TOML file with per-subcommand defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Exit with code 4 when a solver stops without converging.
    #[arg(long, global = true)]
    strict: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Seeded Monte Carlo comparison of all estimators.
    Bench(BenchArgs),
    /// Estimate an impulse response from a CSV data file.
    Fit(FitArgs),
    /// Sample a prior and summarize its coefficient statistics.
    SamplePrior(SamplePriorArgs),
    /// Print or save a regularization matrix P(η).
    Kernel(KernelArgs),
    /// Dump the atomic dictionary.
    Atoms(AtomsArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Monte Carlo runs [default: 50]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Data length, 300 or 1000 [default: 300]
    #[arg(long)]
    pub n: Option<usize>,
    /// Allow any data length.
    #[arg(long)]
    pub n_free: bool,
    /// Base seed; run r uses seed ^ r [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated estimators [default: all]
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    /// Order of the random systems [default: 30]
    #[arg(long)]
    pub order: Option<usize>,
    /// Worker threads.
    #[arg(long, env = "REGID_JOBS")]
    pub jobs: Option<usize>,
    /// Output directory [default: bench-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-estimator wall times to timings.csv.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with header `t,u,y` or `t,y,u1,...,u7`.
    pub data: PathBuf,
    /// tc, ss, itc, iss, its, hankel or atomic [default: its]
    #[arg(long)]
    pub method: Option<String>,
    /// Kernel kind; same as `--method <kind>`.
    #[arg(long, conflicts_with = "method")]
    pub kernel: Option<String>,
    /// FIR order [default: 100, or 99 for hankel]
    #[arg(long)]
    pub order: Option<usize>,
    /// Noise variance, `auto` or a value (kernel methods) [default: auto]
    #[arg(long)]
    pub sigma2: Option<String>,
    /// `auto`, `cv`, `oracle` or a value (hankel and atomic) [default: auto]
    #[arg(long)]
    pub gamma: Option<String>,
    /// Folds for atomic cross-validation [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Impulse response CSV (`t,g`) for `--gamma oracle`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File name stem [default: the method]
    #[arg(long)]
    pub stem: Option<String>,
}

#[derive(Debug, Args)]
pub struct SamplePriorArgs {
    /// `hankel`, `hankel-approx` or `kernel:<kind>` [default: hankel]
    #[arg(long)]
    pub prior: Option<String>,
    /// Chain length or number of draws [default: 100000]
    #[arg(long)]
    pub length: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Impulse response length, odd for Hankel priors [default: 99]
    #[arg(long)]
    pub m: Option<usize>,
    /// 2λ of the Hankel prior [default: 1]
    #[arg(long)]
    pub two_lambda: Option<f64>,
    /// 1-based correlation row to report [default: 50]
    #[arg(long)]
    pub row: Option<usize>,
    /// Kernel prior scale λ [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Kernel decay α for tc and ss [default: 0.9]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Lower decay α_m for integral kernels [default: 0.5]
    #[arg(long)]
    pub alpha_min: Option<f64>,
    /// Upper decay α_M for integral kernels [default: 0.99]
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Also write every 100th kept state to dump.csv.
    #[arg(long)]
    pub dump: bool,
    /// Output directory [default: prior-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// tc, ss, itc, iss or its.
    #[arg(long)]
    pub kind: Option<String>,
    /// Matrix size [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Decay α for tc and ss [default: 0.9]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Lower decay α_m for integral kernels [default: 0.5]
    #[arg(long)]
    pub alpha_min: Option<f64>,
    /// Upper decay α_M for integral kernels [default: 0.99]
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Output directory; prints to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AtomsArgs {
    /// Atom length [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// Leading samples per atom [default: 10]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory; prints to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("regid: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Bench(args) => commands::bench(args, file.bench, cli.strict),
        Command::Fit(args) => commands::fit(args, file.fit, cli.strict),
        Command::SamplePrior(args) => commands::sample_prior(args, file.sample_prior),
        Command::Kernel(args) => commands::kernel(args, file.kernel),
        Command::Atoms(args) => commands::atoms(args, file.atoms),
    }
}
