//! JSON reports written to standard output.

use std::collections::BTreeMap;

use otmsqit_core::analysis::{ExperimentStats, OutcomeDistribution};
use otmsqit_core::protocol::{ProtocolRun, Stage, ValidationReport};
use otmsqit_core::{BitVector, Scenario};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    Aborted,
    RecoveryMismatch,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Aborted => 2,
            RunStatus::RecoveryMismatch => 3,
        }
    }
}

/// Deterministic stand-in for stage timings: how much happened in each stage.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptSummary {
    pub stream_len: usize,
    pub events: usize,
    pub messages: BTreeMap<Stage, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub scenario: Scenario,
    pub transcript: TranscriptSummary,
    pub validation: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered: Option<Vec<BitVector>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent_success: Option<Vec<bool>>,
}

impl RunReport {
    pub fn new(scenario: &Scenario, run: &ProtocolRun) -> Self {
        let t = &run.transcript;
        let mut messages = BTreeMap::new();
        for m in t.public_messages() {
            *messages.entry(m.stage).or_insert(0) += 1;
        }
        let agent_success: Option<Vec<bool>> = t
            .recovered
            .as_ref()
            .map(|r| r.iter().zip(&scenario.pivs).map(|(got, want)| got == want).collect());
        let status = match &agent_success {
            None => RunStatus::Aborted,
            Some(flags) if flags.iter().all(|&ok| ok) => RunStatus::Success,
            Some(_) => RunStatus::RecoveryMismatch,
        };
        Self {
            status,
            scenario: scenario.clone(),
            transcript: TranscriptSummary {
                stream_len: t.stream_len,
                events: t.events.len(),
                messages,
            },
            validation: t.validation.clone().expect("validation always runs"),
            recovered: t.recovered.clone(),
            agent_success,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub stats: ExperimentStats,
}

/// Probabilities printed with at most 15 significant digits so that exact
/// dyadic values come out clean.
pub fn format_probability(p: f64) -> String {
    if p == 0.0 {
        return "0".into();
    }
    let digits = 14 - p.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits);
    format!("{}", (p * scale).round() / scale)
}

pub fn write_distribution_csv<W: std::io::Write>(dist: &OutcomeDistribution, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outcome", "probability"])?;
    for &(idx, p) in &dist.entries {
        w.write_record([dist.label(idx), format_probability(p)])?;
    }
    w.flush()?;
    Ok(())
}
