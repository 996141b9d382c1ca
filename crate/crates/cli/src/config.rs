//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use npvi_core::baselines::HmcConfig;
use npvi_core::models::{PredictiveEstimator, TMixtureSpec};
use npvi_core::NpvConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Gaussian {
        mean: Vec<f64>,
        variance: Vec<f64>,
    },
    StandardNormal {
        #[serde(default = "one")]
        dim: usize,
    },
    Bimodal,
    TMixture {
        #[serde(default)]
        spec: Option<TMixtureSpec>,
    },
    Logistic {
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_b")]
        b: f64,
    },
    Tlsa {
        sources: usize,
        /// Voxels sit on a `grid_side x grid_side` grid of cell centres.
        grid_side: usize,
        #[serde(default = "one_f")]
        tau: f64,
        #[serde(default = "default_sigma_w2")]
        sigma_w2: f64,
        #[serde(default = "one_f")]
        rho: f64,
    },
}

impl ModelConfig {
    pub fn needs_data(&self) -> bool {
        matches!(self, ModelConfig::Logistic { .. } | ModelConfig::Tlsa { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineConfig {
    Npv(NpvConfig),
    Map {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    Laplace {
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    Hmc(HmcConfig),
}

pub const ENGINE_NAMES: [&str; 4] = ["npv", "map", "laplace", "hmc"];

impl EngineConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EngineConfig::Npv(_) => "npv",
            EngineConfig::Map { .. } => "map",
            EngineConfig::Laplace { .. } => "laplace",
            EngineConfig::Hmc(_) => "hmc",
        }
    }

    /// Short human-readable label, e.g. `npv(N=5)`.
    pub fn label(&self) -> String {
        match self {
            EngineConfig::Npv(c) => format!("npv(N={})", c.num_components),
            EngineConfig::Map { restarts } => format!("map(restarts={restarts})"),
            EngineConfig::Laplace { restarts } => format!("laplace(restarts={restarts})"),
            EngineConfig::Hmc(c) => format!("hmc(step={},L={})", c.step_size, c.leapfrog_steps),
        }
    }
}

/// One experiment. `engine` is used by `fit`, `engines` by `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub engine: Option<EngineConfig>,
    #[serde(default)]
    pub engines: Vec<EngineConfig>,
    /// Dataset CSV for data-backed models.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Leading fraction of rows used for training. `fit` uses every row when
    /// unset; `compare` defaults to 0.5.
    #[serde(default)]
    pub split: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_predictive_samples")]
    pub predictive_samples: usize,
    #[serde(default)]
    pub estimator: PredictiveEstimator,
}

/// Parameters for `synth-data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthConfig {
    Logistic {
        rows: usize,
        covariates: usize,
        #[serde(default = "one_f")]
        alpha: f64,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        output_dir: Option<PathBuf>,
    },
    Tlsa {
        rows: usize,
        covariates: usize,
        sources: usize,
        grid_side: usize,
        #[serde(default = "one_f")]
        tau: f64,
        #[serde(default = "default_sigma_w2")]
        sigma_w2: f64,
        #[serde(default = "one_f")]
        rho: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        output_dir: Option<PathBuf>,
    },
}

impl SynthConfig {
    pub fn seed_mut(&mut self) -> &mut u64 {
        match self {
            SynthConfig::Logistic { seed, .. } | SynthConfig::Tlsa { seed, .. } => seed,
        }
    }

    pub fn output_dir_mut(&mut self) -> &mut Option<PathBuf> {
        match self {
            SynthConfig::Logistic { output_dir, .. } | SynthConfig::Tlsa { output_dir, .. } => output_dir,
        }
    }
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_a() -> f64 {
    1.0
}
fn default_b() -> f64 {
    0.01
}
fn default_sigma_w2() -> f64 {
    5.0
}
fn default_restarts() -> usize {
    10
}
fn default_predictive_samples() -> usize {
    1000
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
