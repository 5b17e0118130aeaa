//! Run configuration files.

use std::path::{Path, PathBuf};

use safestop_sim::scenario::{Scenario, SCENARIO_SCHEMA};
use safestop_sim::{OperatorParams, Profile, ScenarioSpec, SimConfig, TrialSetup};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RUN_CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    Enabled,
    Disabled,
    #[default]
    Both,
}

impl Monitoring {
    /// Monitoring flags to run, in output order.
    pub fn modes(self) -> &'static [bool] {
        match self {
            Monitoring::Enabled => &[true],
            Monitoring::Disabled => &[false],
            Monitoring::Both => &[true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub scenario: ScenarioSpec,
    /// Scenario file; overrides `scenario` when set. Relative paths resolve
    /// against the config file's directory.
    pub scenario_file: Option<PathBuf>,
    pub sim: SimConfig,
    pub operator: OperatorParams,
    pub profile: Profile,
    /// Trials per monitoring mode.
    pub trials: u64,
    /// Trial `i` uses seed `seed + i`.
    pub seed: u64,
    pub monitoring: Monitoring,
    /// seconds
    pub timeout: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: RUN_CONFIG_SCHEMA,
            scenario: ScenarioSpec::TwoPillarArena,
            scenario_file: None,
            sim: SimConfig::default(),
            operator: OperatorParams::default(),
            profile: Profile::Aggressive,
            trials: 1,
            seed: 0,
            monitoring: Monitoring::Both,
            timeout: 120.0,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|source| ConfigError::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        if let Some(file) = cfg.scenario_file.take() {
            let base = origin.parent().unwrap_or(Path::new("."));
            cfg.scenario_file = Some(base.join(file));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn setup(&self) -> TrialSetup {
        TrialSetup {
            sim: self.sim.clone(),
            operator: self.operator,
            profile: self.profile,
            timeout: self.timeout,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.trials).map(|i| self.seed.wrapping_add(i)).collect()
    }

    /// Check every field, resolve the scenario file, and return the
    /// scenario source to run. All problems are reported together.
    pub fn resolve(&self) -> Result<ScenarioSpec, ConfigError> {
        let mut problems = Vec::new();
        if self.schema != RUN_CONFIG_SCHEMA {
            problems.push(format!("schema: expected {RUN_CONFIG_SCHEMA}, found {}", self.schema));
        }
        if self.trials < 1 {
            problems.push("trials: must be at least 1".to_string());
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            problems.push(format!("timeout: must be positive, found {}", self.timeout));
        }
        if let Err(e) = self.sim.monitor_period_ticks() {
            problems.push(format!("sim: {e}"));
        }
        let spec = match &self.scenario_file {
            Some(path) => match Scenario::load(path) {
                Ok(s) => Some(ScenarioSpec::Fixed { scenario: Box::new(s) }),
                Err(e) => {
                    problems.push(format!("scenario_file: {}: {e}", path.display()));
                    None
                }
            },
            None => Some(self.scenario.clone()),
        };
        if let Some(spec) = &spec {
            match spec.scenario(self.seed) {
                Ok(s) => {
                    if s.schema != SCENARIO_SCHEMA {
                        problems.push(format!("scenario: unsupported schema {}", s.schema));
                    } else if let Err(e) = s.validate(self.sim.feasibility.clearance_radius) {
                        problems.push(format!("scenario: {e}"));
                    }
                }
                Err(e) => problems.push(format!("scenario: {e}")),
            }
        }
        match (spec, problems.is_empty()) {
            (Some(spec), true) => Ok(spec),
            _ => Err(ConfigError::Invalid(problems)),
        }
    }
}
