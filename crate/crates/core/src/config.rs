//! Run configuration: TOML file plus command-line overrides.
//!
//! ```toml
//! seed = 7
//! simulations = 500
//! periods = 250
//! roster = ["logit", "ols", "greedy"]
//! trace_level = "revenue"
//!
//! [strategies.greedy]
//! window = 20
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{SimulationSettings, TournamentSettings, TraceLevel, DEFAULT_STEP_BUDGET};
use crate::strategies::{StrategyId, StrategyParams, UnknownStrategy};

pub const DEFAULT_SIMULATIONS: i64 = 5000;
pub const DEFAULT_PERIODS: i64 = 1000;
pub const DEFAULT_OUT_DIR: &str = "dpsim-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    UnknownStrategy(#[from] UnknownStrategy),
    #[error("`{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: i64 },
    #[error("roster needs at least 2 strategies, got {0}")]
    RosterTooSmall(usize),
}

/// Configuration as written by the user, before validation.
///
/// Counts are signed so that `0` and negative values reach validation and
/// get a specific diagnostic instead of a type error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: u64,
    pub simulations: i64,
    pub periods: i64,
    pub roster: Vec<String>,
    pub out: PathBuf,
    /// Worker threads; `0` means all cores.
    pub parallelism: usize,
    pub trace_level: TraceLevel,
    pub step_budget: u64,
    pub strategies: StrategyParams,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            seed: 0,
            simulations: DEFAULT_SIMULATIONS,
            periods: DEFAULT_PERIODS,
            roster: StrategyId::ALL.iter().map(|id| id.as_str().to_string()).collect(),
            out: PathBuf::from(DEFAULT_OUT_DIR),
            parallelism: 0,
            trace_level: TraceLevel::Full,
            step_budget: DEFAULT_STEP_BUDGET,
            strategies: StrategyParams::default(),
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let simulations = positive("simulations", self.simulations)?;
        let periods = positive("periods", self.periods)?;
        let roster = self.roster.iter().map(|s| s.parse()).collect::<Result<Vec<StrategyId>, _>>()?;
        if roster.len() < 2 {
            return Err(ConfigError::RosterTooSmall(roster.len()));
        }
        Ok(RunConfig {
            seed: self.seed,
            simulations,
            periods: periods as usize,
            roster,
            out: self.out,
            parallelism: self.parallelism,
            trace_level: self.trace_level,
            step_budget: self.step_budget,
            strategies: self.strategies,
        })
    }
}

fn positive(field: &'static str, value: i64) -> Result<u64, ConfigError> {
    if value > 0 {
        Ok(value as u64)
    } else {
        Err(ConfigError::NonPositive { field, value })
    }
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub simulations: u64,
    pub periods: usize,
    pub roster: Vec<StrategyId>,
    pub out: PathBuf,
    pub parallelism: usize,
    pub trace_level: TraceLevel,
    pub step_budget: u64,
    pub strategies: StrategyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        ConfigFile::default().resolve().expect("defaults are valid")
    }
}

/// The part of a configuration that determines simulation output.
///
/// Output directory and thread count are excluded: they never change a
/// trace byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub simulations: u64,
    pub periods: usize,
    pub roster: Vec<StrategyId>,
    pub trace_level: TraceLevel,
    pub step_budget: u64,
    pub strategies: StrategyParams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        ConfigFile::parse(text)?.resolve()
    }

    pub fn resolved(&self) -> ResolvedConfig {
        ResolvedConfig {
            seed: self.seed,
            simulations: self.simulations,
            periods: self.periods,
            roster: self.roster.clone(),
            trace_level: self.trace_level,
            step_budget: self.step_budget,
            strategies: self.strategies.clone(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form of [`Self::resolved`].
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.resolved()).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn tournament_settings(&self) -> TournamentSettings {
        let mut simulation = SimulationSettings::new(self.seed, self.periods);
        simulation.trace_level = self.trace_level;
        simulation.step_budget = self.step_budget;
        TournamentSettings { simulations: self.simulations, parallelism: self.parallelism, simulation }
    }
}
