//! Scenario files.
//!
//! ```toml
//! n = 3
//! pivs = ["010", "101"]   # pivs[k] goes to Agent_k, most-significant bit first
//! d = 6                   # default: total PIV length
//! noise_p = 0.0
//! threshold_fraction = 0.125
//! seed = 7
//! trials = 1000
//!
//! [eve]
//! strategy = "measure_resend"   # none | measure_resend | intercept_replace | entangle_ancilla
//! basis_policy = "random_basis" # measure_resend only; default always_computational
//! k = 1                         # attack Agent_0 .. Agent_{k-1}; default every agent
//! # targets = [1]               # explicit agent list instead of k
//! ```

use std::path::{Path, PathBuf};

use otmsqit_core::protocol::DEFAULT_THRESHOLD_FRACTION;
use otmsqit_core::{AttackKind, BasisPolicy, BitVector, EveStrategy, Scenario};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_TRIALS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: Option<usize>,
    pub pivs: Vec<BitVector>,
    pub d: Option<usize>,
    #[serde(default)]
    pub eve: EveSection,
    pub noise_p: Option<f64>,
    pub threshold_fraction: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EveSection {
    pub strategy: AttackKind,
    pub basis_policy: Option<BasisPolicy>,
    pub k: Option<usize>,
    pub targets: Option<Vec<usize>>,
}

impl Default for EveSection {
    fn default() -> Self {
        Self {
            strategy: AttackKind::None,
            basis_policy: None,
            k: None,
            targets: None,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn to_scenario(&self, seed: Option<u64>) -> Result<Scenario, CliError> {
        let agents = self.pivs.len();
        if let Some(n) = self.n {
            if n != agents + 1 {
                return Err(CliError::Invalid(format!(
                    "n = {n} but {agents} PIVs were given (expected n − 1)"
                )));
            }
        }
        let eve = self.eve.to_strategy(agents)?;
        let mut scenario = Scenario::new(self.pivs.clone(), seed.unwrap_or(self.seed)).with_eve(eve);
        if let Some(d) = self.d {
            scenario = scenario.with_decoys(d);
        }
        scenario = scenario
            .with_noise(self.noise_p.unwrap_or(0.0))
            .with_threshold(self.threshold_fraction.unwrap_or(DEFAULT_THRESHOLD_FRACTION));
        scenario.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(scenario)
    }
}

impl EveSection {
    fn to_strategy(&self, agents: usize) -> Result<EveStrategy, CliError> {
        let invalid = |e: otmsqit_core::Error| CliError::Invalid(e.to_string());
        if self.strategy == AttackKind::None {
            if self.basis_policy.is_some() || self.k.is_some() || self.targets.is_some() {
                return Err(CliError::Invalid("eve settings given with strategy = \"none\"".into()));
            }
            return Ok(EveStrategy::none());
        }
        let policy = match self.strategy {
            AttackKind::MeasureResend => Some(self.basis_policy.unwrap_or(BasisPolicy::AlwaysComputational)),
            _ => self.basis_policy,
        };
        match (self.k, &self.targets) {
            (Some(_), Some(_)) => Err(CliError::Invalid("give either eve.k or eve.targets, not both".into())),
            (_, Some(targets)) => EveStrategy::new(self.strategy, policy, targets.clone()).map_err(invalid),
            (k, None) => EveStrategy::lowest(self.strategy, policy, k.unwrap_or(agents)).map_err(invalid),
        }
    }
}

/// Resolves a scenario path, falling back to `config_dir` for relative
/// paths that do not exist as given.
pub fn resolve(path: &Path, config_dir: Option<&Path>) -> PathBuf {
    match config_dir {
        Some(dir) if path.is_relative() && !path.exists() => dir.join(path),
        _ => path.to_path_buf(),
    }
}
