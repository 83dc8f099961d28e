//! Command-line harness over `sice-core`.
//!
//! Subcommands: `estimate` (file in, file out), `fig5` (structure
//! recovery over a sample-size grid), `sweep` (one-hyperparameter
//! robustness sweep), `gradcheck` (finite-difference validation of the
//! tape gradients), `bench` (wall-time comparison of the solvers).
//!
//! Exit codes: 0 success, 2 malformed input or usage, 3 numerical
//! failure (divergence, non-convergence, threshold violation).
//!
//! Every command is deterministic given its seeds: result CSVs are
//! byte-identical across reruns and thread counts. Wall-clock
//! measurements never enter result CSVs; they are confined to sidecar
//! files (`timings.jsonl`, `bench.csv`).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod bench;
pub mod config;
pub mod csvio;
pub mod estimate;
pub mod experiment;
pub mod gradcheck;
pub mod sweep;

/// Exit status 0.
pub const EXIT_OK: i32 = 0;
/// Exit status for malformed input or invalid usage.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

/// Command error carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input, bad configuration, invalid flags (exit 2).
    Input(String),
    /// Solver divergence, non-convergence, threshold violation (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }

    pub fn input(msg: impl Into<String>) -> CliError {
        CliError::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> CliError {
        CliError::Numerical(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "sice",
    version,
    about = "Sparse inverse covariance estimation toolkit",
    max_term_width = 100
)]
pub struct Cli {
    /// Master random seed (overrides the config file's master_seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for experiment trials (default 1).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for output files (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    /// d x n descriptor matrix; the covariance is pooled first.
    Descriptors,
    /// d x d covariance matrix, used as-is.
    Covariance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mle,
    Glasso,
    Isice,
    Precision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Lambda,
    Eta,
    Iterations,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Estimate a precision matrix from a CSV file.
    Estimate {
        /// Input CSV (descriptor or covariance matrix).
        #[arg(long)]
        input: PathBuf,
        /// How to interpret the input file.
        #[arg(long, value_enum, default_value = "descriptors")]
        input_kind: InputKind,
        /// Estimator to run.
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Output CSV for the estimated matrix (a .json sidecar is
        /// written next to it).
        #[arg(long)]
        output: PathBuf,
    },
    /// Structure-recovery experiment: generate a ground-truth precision
    /// matrix, sample data over a grid of sample sizes, estimate with
    /// the configured methods, and record recovery errors.
    Fig5,
    /// Recovery-error sweep of one solver hyperparameter while the
    /// others stay fixed.
    Sweep {
        /// Which hyperparameter varies.
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<String>,
    },
    /// Finite-difference validation of the tape gradients: primitives,
    /// log-determinant, the Newton-Schulz pipeline, and the full solver
    /// pipeline.
    Gradcheck {
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        iterations: usize,
        #[arg(long, default_value_t = 10)]
        ns_iterations: usize,
        /// Test hook: corrupt one analytic adjoint entry so the check
        /// must fail (negative control).
        #[arg(long, hide = true, default_value_t = false)]
        corrupt_adjoint: bool,
    },
    /// Median wall time per solve: iterative solver vs ADMM to
    /// convergence vs plain Newton-Schulz inverse.
    Bench {
        /// Comma-separated dimensions, each one of 32, 64, 128, 256.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, default_value_t = 5)]
        ns_iterations: usize,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

/// Parses arguments and runs the selected command, returning the
/// process exit code. The binary is a thin wrapper around this, and
/// tests drive it in-process.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, anything else is usage
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.cmd {
        Cmd::Estimate {
            input,
            input_kind,
            method,
            output,
        } => estimate::cmd_estimate(
            input,
            *input_kind,
            *method,
            output,
            cli.config.as_deref(),
        ),
        Cmd::Fig5 => experiment::cmd_fig5(
            cli.config.as_deref(),
            &out_dir,
            cli.seed,
            cli.threads.unwrap_or(1),
        ),
        Cmd::Sweep { param, grid } => sweep::cmd_sweep(
            cli.config.as_deref(),
            &out_dir,
            cli.seed,
            cli.threads.unwrap_or(1),
            *param,
            grid,
        ),
        Cmd::Gradcheck {
            dim,
            iterations,
            ns_iterations,
            corrupt_adjoint,
        } => gradcheck::cmd_gradcheck(
            *dim,
            *iterations,
            *ns_iterations,
            cli.seed.unwrap_or(0),
            *corrupt_adjoint,
        ),
        Cmd::Bench {
            dims,
            iterations,
            ns_iterations,
            lambda,
            repeats,
        } => bench::cmd_bench(
            dims,
            *iterations,
            *ns_iterations,
            *lambda,
            *repeats,
            cli.seed.unwrap_or(0),
            &out_dir,
        ),
    }
}
