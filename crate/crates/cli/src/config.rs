//! Run configuration: one TOML file describing a whole experiment.
//!
//! ```toml
//! out_dir = "runs/desk"
//!
//! [env]          # EnvConfig
//! [net]          # NetConfig
//! [train]        # TrainConfig
//! [eval]         # EvalConfig
//!
//! [dataset]
//! dir = "data/desk"
//! split_seed = 7
//!
//! [dataset.synthetic]      # only needed by `generate`
//! n_volumes = 40
//! dims = [64, 64, 64]
//! seed = 11
//! landmarks = [{ name = "L1", sigma = 3.0 }]
//!
//! [experiment]
//! kind = "multi_landmark"
//! landmarks = ["L1"]
//! ensemble_size = 5
//! ```
//!
//! Every section except `[dataset]` may be omitted and takes its defaults.
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use cmarl_core::evaluator::{plan_experiment, PlannedRun};
use cmarl_core::volume::LandmarkSpec;
use cmarl_core::{EnvConfig, EvalConfig, ExperimentKind, NetConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("net.in_frames = {net} but env.history_len = {env}")]
    FrameMismatch { net: usize, env: usize },
    #[error("net.roi_size = {net} but env.roi_size = {env}")]
    RoiMismatch { net: usize, env: usize },
    #[error("net.n_agents = {net} but the {run} agent map has {map} agents")]
    AgentCountMismatch { net: usize, map: usize, run: String },
    #[error("dataset directory {0} does not exist")]
    MissingDataset(PathBuf),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub dir: PathBuf,
    /// Used when the directory has no `split.json`, and written into the
    /// manifest by `generate`.
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_volumes: usize,
    #[serde(default = "default_dims")]
    pub dims: [usize; 3],
    /// Family seed; volume `i` uses per-volume seed `i` within the family.
    #[serde(default)]
    pub seed: u64,
    pub landmarks: Vec<LandmarkSpec>,
}

fn default_dims() -> [usize; 3] {
    [64; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub landmarks: Vec<String>,
    pub ensemble_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::MultiLandmark,
            landmarks: Vec::new(),
            ensemble_size: 5,
        }
    }
}

impl RunConfig {
    /// Parse, resolve relative paths against the file's directory, and
    /// validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
        if self.dataset.dir.is_relative() {
            self.dataset.dir = base.join(&self.dataset.dir);
        }
    }

    /// The networks this config trains, in order.
    pub fn planned_runs(&self) -> Result<Vec<PlannedRun>> {
        let ex = &self.experiment;
        plan_experiment(ex.kind, &ex.landmarks, &self.net, ex.ensemble_size)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Check every section and the cross-field constraints. The network
    /// shape must match the environment and the first planned run; later
    /// runs of the same experiment derive their agent count from the plan.
    pub fn validate(&self) -> Result<()> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.env.validate().map_err(|e| invalid(&e))?;
        self.train.validate().map_err(|e| invalid(&e))?;
        if self.net.in_frames != self.env.history_len {
            return Err(ConfigError::FrameMismatch {
                net: self.net.in_frames,
                env: self.env.history_len,
            });
        }
        if self.net.roi_size != self.env.roi_size {
            return Err(ConfigError::RoiMismatch {
                net: self.net.roi_size,
                env: self.env.roi_size,
            });
        }
        if self.experiment.landmarks.is_empty() {
            return Err(ConfigError::Invalid("experiment.landmarks is empty".into()));
        }
        let runs = self.planned_runs()?;
        let first = &runs[0];
        if self.net.n_agents != first.map.n_agents() {
            return Err(ConfigError::AgentCountMismatch {
                net: self.net.n_agents,
                map: first.map.n_agents(),
                run: first.label.clone(),
            });
        }
        for run in &runs {
            run.net.validate().map_err(|e| invalid(&e))?;
        }
        if let Some(syn) = &self.dataset.synthetic {
            if syn.n_volumes < 3 {
                return Err(ConfigError::Invalid(format!(
                    "dataset.synthetic.n_volumes = {}; need at least 3 to split",
                    syn.n_volumes
                )));
            }
            for l in &self.experiment.landmarks {
                if !syn.landmarks.iter().any(|s| &s.name == l) {
                    return Err(ConfigError::Invalid(format!(
                        "experiment landmark {l} is not generated by dataset.synthetic"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fail early when the dataset directory is absent.
    pub fn require_dataset(&self) -> Result<()> {
        if !self.dataset.dir.is_dir() {
            return Err(ConfigError::MissingDataset(self.dataset.dir.clone()));
        }
        Ok(())
    }
}
