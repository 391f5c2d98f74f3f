//! `mmd`: kernel two-sample tests, simulation drivers and formula checks.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 check failure.

mod commands;
mod error;
mod io;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::null_dist::NullDistArgs;
use commands::oracle_check::OracleCheckArgs;
use commands::power_sim::PowerSimArgs;
use commands::test::TestArgs;
use commands::tune::TuneArgs;
use commands::variance::VarianceArgs;
use commands::Context;
use error::{CliError, EXIT_USAGE};
use record::Format;

#[derive(Parser, Debug)]
#[command(name = "mmd", version, about = "Kernel two-sample testing with unequal sample sizes")]
struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0, env = "MMD_SEED")]
    seed: u64,

    /// Worker threads; defaults to the number of CPUs. Results do not depend on it.
    #[arg(long, global = true, env = "MMD_THREADS")]
    threads: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, global = true, env = "MMD_OUT")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json, env = "MMD_FORMAT")]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Permutation test of P = Q on two CSV files.
    Test(TestArgs),
    /// Select kernel parameters on a training split, then test on the rest.
    Tune(TuneArgs),
    /// Rejection-rate curve over nX for Gaussian data.
    PowerSim(PowerSimArgs),
    /// Histograms and Q-Q pairs of the scaled statistic on Laplace data.
    NullDist(NullDistArgs),
    /// Plug-in or exact variance of the unbiased estimator.
    Variance(VarianceArgs),
    /// Check the closed-form variances against exhaustive enumeration.
    OracleCheck(OracleCheckArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = Context {
        seed: cli.seed,
        format: cli.format,
        out: cli.out,
    };
    match &cli.command {
        Command::Test(args) => commands::test::run(args, &ctx),
        Command::Tune(args) => commands::tune::run(args, &ctx),
        Command::PowerSim(args) => commands::power_sim::run(args, &ctx),
        Command::NullDist(args) => commands::null_dist::run(args, &ctx),
        Command::Variance(args) => commands::variance::run(args, &ctx),
        Command::OracleCheck(args) => commands::oracle_check::run(args, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
