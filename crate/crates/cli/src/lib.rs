//! Command implementations behind the `otmsqit` binary.

pub mod config;
pub mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use otmsqit_core::analysis::{detection_experiment, oracle_triangle, scenario_distribution};
use otmsqit_core::error::Error as CoreError;
use otmsqit_core::run_protocol;

use crate::config::ScenarioFile;
use crate::report::{write_distribution_csv, ExperimentReport, RunReport};

/// Exit status for usage, parse, and configuration errors.
pub const EXIT_USAGE: u8 = 64;
/// Exit status when the oracle cross-check finds a disagreement.
pub const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("writing output: {0}")]
    Output(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

fn write_json<W: Write, T: serde::Serialize>(out: &mut W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// One protocol run. Returns the process exit status.
pub fn cmd_run<W: Write>(file: &ScenarioFile, seed: Option<u64>, output: Option<&Path>, out: &mut W) -> Result<u8, CliError> {
    let scenario = file.to_scenario(seed)?;
    let run = run_protocol(&scenario)?;
    let report = RunReport::new(&scenario, &run);
    match output {
        Some(path) => write_json(&mut create(path)?, &report)?,
        None => write_json(out, &report)?,
    }
    Ok(report.status.exit_code())
}

/// Batch of trials; the aggregate report goes to `out`, per-trial rows to `csv_path`.
pub fn cmd_experiment<W: Write>(
    file: &ScenarioFile,
    seed: Option<u64>,
    trials: Option<u64>,
    csv_path: Option<&Path>,
    out: &mut W,
) -> Result<u8, CliError> {
    let scenario = file.to_scenario(seed)?;
    let trials = trials.unwrap_or_else(|| file.trials());
    if trials == 0 {
        return Err(CliError::Invalid("trials must be at least 1".into()));
    }
    let experiment = detection_experiment(&scenario, trials)?;
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_writer(create(path)?);
        for row in &experiment.trials {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    write_json(
        out,
        &ExperimentReport {
            scenario,
            stats: experiment.stats,
        },
    )?;
    Ok(0)
}

pub fn cmd_distribution<W: Write>(file: &ScenarioFile, output: Option<&Path>, out: &mut W) -> Result<u8, CliError> {
    let scenario = file.to_scenario(None)?;
    let dist = scenario_distribution(&scenario).map_err(|e| match e {
        CoreError::OracleCap(msg) => CliError::Invalid(format!(
            "{msg}; the exact distribution is too large, use `experiment` or analytic sampling instead"
        )),
        other => CliError::Core(other),
    })?;
    match output {
        Some(path) => write_distribution_csv(&dist, create(path)?)?,
        None => write_distribution_csv(&dist, out)?,
    }
    Ok(0)
}

pub fn cmd_oracle_check<W: Write>(cases: usize, samples: usize, seed: u64, out: &mut W) -> Result<u8, CliError> {
    const PROB_TOL: f64 = 1e-10;
    const P_MIN: f64 = 0.001;
    let results = oracle_triangle(cases, 18, samples, seed)?;
    let mut failed = 0;
    for c in &results {
        let pass = c.passed(PROB_TOL, P_MIN);
        failed += usize::from(!pass);
        writeln!(
            out,
            "{} n={} aiv={} support={} max_diff={:.1e} chi2_p={:.4}",
            if pass { "PASS" } else { "FAIL" },
            c.n,
            c.aiv,
            c.support,
            c.max_abs_diff,
            c.chi_square.p_value
        )?;
    }
    writeln!(out, "{} of {} cases passed", results.len() - failed, results.len())?;
    Ok(if failed == 0 { 0 } else { EXIT_CHECK_FAILED })
}
