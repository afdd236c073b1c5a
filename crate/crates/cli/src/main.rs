use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use otmsqit_cli::config::{resolve, ScenarioFile};
use otmsqit_cli::{cmd_distribution, cmd_experiment, cmd_oracle_check, cmd_run, CliError, EXIT_USAGE};

/// Simulate GHZ-based secret distribution from Alice to a group of agents.
#[derive(Debug, Parser)]
#[command(name = "otmsqit", version)]
struct Cli {
    /// Directory searched for relative scenario paths that do not exist as given.
    #[arg(long, global = true, env = "OTMSQIT_CONFIG_DIR")]
    config_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the protocol once and print a JSON report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run many independent trials and print aggregate statistics.
    Experiment {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Per-trial CSV (trial, errors, decoy_checks, verdict, eve_bit_accuracy).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the exact decryption-stage outcome distribution as CSV.
    Distribution {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-check the joint and factorized oracles against analytic sampling.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random (n, m, aiv) cases.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

fn load(path: &Path, config_dir: Option<&Path>) -> Result<ScenarioFile, CliError> {
    ScenarioFile::load(&resolve(path, config_dir))
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    let dir = cli.config_dir.as_deref();
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Run { scenario, seed, output } => cmd_run(&load(&scenario, dir)?, seed, output.as_deref(), &mut out),
        Command::Experiment {
            scenario,
            seed,
            trials,
            output,
        } => cmd_experiment(&load(&scenario, dir)?, seed, trials, output.as_deref(), &mut out),
        Command::Distribution { scenario, output } => cmd_distribution(&load(&scenario, dir)?, output.as_deref(), &mut out),
        Command::OracleCheck { seed, trials, samples } => cmd_oracle_check(trials, samples, seed, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
