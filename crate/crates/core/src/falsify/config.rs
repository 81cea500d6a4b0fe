//! Campaign configuration, loadable from a TOML file.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::surrogate::TrainConfig;
use crate::symreg::SrConfig;

fn default_budget() -> usize {
    10
}
fn default_horizon() -> f64 {
    40.0
}
fn default_dt() -> f64 {
    0.2
}
fn default_smoothing() -> f64 {
    2.0
}
fn default_segment() -> f64 {
    5.0
}
fn default_orders() -> Vec<usize> {
    vec![2]
}
fn default_known() -> String {
    "zero".into()
}
fn default_n_extra() -> usize {
    200
}
fn default_perturb() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub plant: String,
    pub spec: String,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Campaign horizon in seconds (one SUT experiment's duration).
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Collocation step.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Corners-random segment length in seconds.
    #[serde(default = "default_segment")]
    pub segment_seconds: f64,
    /// Lifting order per plant output.
    #[serde(default = "default_orders")]
    pub lifting_orders: Vec<usize>,
    /// Known-dynamics identifier ("zero" or "neg-state").
    #[serde(default = "default_known")]
    pub known_dynamics: String,
    /// Extra perturbed derivative samples for distillation.
    #[serde(default = "default_n_extra")]
    pub sr_extra_samples: usize,
    #[serde(default = "default_perturb")]
    pub sr_perturb_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sr: SrConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.segment_seconds > 0.0) {
            return Err(Error::InvalidConfig(
                "horizon, dt, and segment length must be positive".into(),
            ));
        }
        if !(self.smoothing > 0.0) {
            return Err(Error::InvalidConfig("smoothing k must be positive".into()));
        }
        if self.lifting_orders.is_empty() || self.lifting_orders.iter().any(|&o| o == 0) {
            return Err(Error::InvalidConfig("lifting orders must be >= 1".into()));
        }
        Ok(())
    }
}
