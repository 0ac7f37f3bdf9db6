use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{ModelMapping, TrainConfig};
use crate::env::{EnvOptions, RewardParams};
use crate::error::{Error, Result};
use crate::orders::{ArrivalProcess, RateBlock};
use crate::warehouse::WarehouseConfig;

/// What drives the picker during an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// One of the seven reference baselines, by name.
    Baseline { name: String },
    /// A single trained network.
    Checkpoint { path: PathBuf },
    /// A directory of `model_lambda*_alpha*.ckpt` files; the model is chosen
    /// per arrival-rate block.
    ModelBank {
        dir: PathBuf,
        #[serde(default)]
        mapping: ModelMapping,
    },
    Random,
    Idle,
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Baseline { name } => name.clone(),
            PolicySpec::Checkpoint { path } => format!(
                "drl:{}",
                path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned())
            ),
            PolicySpec::ModelBank { .. } => "drl_bank".into(),
            PolicySpec::Random => "random".into(),
            PolicySpec::Idle => "idle".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub warehouse: WarehouseConfig,
    pub alpha: f64,
    /// Reward per pick; `L + N` when absent.
    pub reward_r: Option<f64>,
    pub env: EnvOptions,
    pub policy: PolicySpec,
    /// Constant arrival rate, used when `schedule` is empty.
    pub lambda: f64,
    pub schedule: Vec<RateBlock>,
    pub shift_seconds: f64,
    pub n_runs: usize,
    pub master_seed: u64,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            warehouse: WarehouseConfig::default(),
            alpha: 1.0,
            reward_r: None,
            env: EnvOptions::default(),
            policy: PolicySpec::Baseline {
                name: "baseline1".into(),
            },
            lambda: 0.06,
            schedule: Vec::new(),
            shift_seconds: 28_800.0,
            n_runs: 10,
            master_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.warehouse.validate()?;
        self.reward_params().validate()?;
        self.train.validate()?;
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
        }
        if !(self.shift_seconds > 0.0 && self.shift_seconds.is_finite()) {
            return Err(Error::InvalidConfig("shift length must be positive".into()));
        }
        if self.schedule.is_empty() && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("arrival rate must be positive".into()));
        }
        Ok(())
    }

    pub fn reward_params(&self) -> RewardParams {
        let mut r = RewardParams::for_config(&self.warehouse, self.alpha);
        if let Some(v) = self.reward_r {
            r.r = v;
        }
        r
    }

    /// Arrival blocks in force, a single unbounded block for a constant rate.
    pub fn rate_blocks(&self) -> Vec<RateBlock> {
        if self.schedule.is_empty() {
            vec![RateBlock {
                duration: f64::INFINITY,
                rate: self.lambda,
            }]
        } else {
            self.schedule.clone()
        }
    }

    pub fn source(&self, seed: u64) -> Result<ArrivalProcess> {
        ArrivalProcess::schedule(self.rate_blocks(), seed, &self.warehouse)
    }
}

/// Grid of policies × arrival rates over a shared base experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    /// All seven baselines when empty.
    pub policies: Vec<PolicySpec>,
    pub base: ExperimentConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: (1..=9).map(|i| i as f64 / 100.0).collect(),
            policies: Vec::new(),
            base: ExperimentConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.base.validate()?;
        if cfg.lambdas.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one arrival rate".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn resolved_policies(&self) -> Vec<PolicySpec> {
        if self.policies.is_empty() {
            crate::baselines::BaselineSpec::canonical(&self.base.warehouse)
                .into_iter()
                .map(|s| PolicySpec::Baseline { name: s.name })
                .collect()
        } else {
            self.policies.clone()
        }
    }
}
