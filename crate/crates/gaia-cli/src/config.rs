//! TOML experiment configuration. Every key has a default, so an empty file
//! (or no file at all) is a valid full-grid experiment; unknown keys are
//! rejected with the offending path in the message.

use crate::error::{CliError, Result};
use gaia_core::dataset::{DatasetConfig, DatasetKind};
use gaia_core::model::ModelConfig;
use gaia_core::train::{ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub viz: VizSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    /// Model kinds to train, canonical order preserved at run time.
    pub models: Vec<String>,
    /// Dataset kinds to train on.
    pub datasets: Vec<String>,
    /// Parallel grid cells; 0 means one per available core.
    pub jobs: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 0,
            models: ModelKind::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            datasets: DatasetKind::ALL.iter().map(|d| d.as_str().to_string()).collect(),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub n_train: usize,
    pub n_eval: usize,
    pub noise: f64,
    pub circle_factor: f64,
    pub blob_std: f64,
    pub blob_centers: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            n_train: 10_000,
            n_eval: 10_000,
            noise: 0.05,
            circle_factor: 0.8,
            blob_std: 1.0,
            blob_centers: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            input_dim: m.input_dim,
            latent_dim: m.latent_dim,
            hidden_layers: m.hidden_layers,
            hidden_units: m.hidden_units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    pub sigmoid_slope: f64,
    pub gamma: f64,
    /// Distance-regularizer weight; omitted means `lr / 2`.
    pub alpha: Option<f64>,
    pub interp_mu: f64,
    pub interp_sigma: f64,
    pub vae_obs_var: f64,
    pub swap_balance: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::new(ModelKind::Gaia);
        Self {
            lr: t.lr,
            batch: t.batch,
            steps: t.steps,
            sigmoid_slope: t.sigmoid_slope,
            gamma: t.gamma,
            alpha: None,
            interp_mu: t.interp_mu,
            interp_sigma: t.interp_sigma,
            vae_obs_var: t.vae_obs_var,
            swap_balance: t.swap_balance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Neighbor count of the KL estimator.
    pub knn_k: usize,
    /// Subsampling cap of the distance-correlation estimator.
    pub max_pairs: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            knn_k: 5,
            max_pairs: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VizSection {
    /// Meshgrid lattice resolution per axis.
    pub resolution: usize,
    /// Heat-map histogram bins per axis.
    pub bins: usize,
    pub panel_size: f64,
    pub margin_frac: f64,
}

impl Default for VizSection {
    fn default() -> Self {
        Self {
            resolution: 20,
            bins: 128,
            panel_size: 240.0,
            margin_frac: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Parsed model list in canonical order, duplicates rejected.
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        let mut kinds = Vec::new();
        for name in &self.experiment.models {
            let kind: ModelKind = name
                .parse()
                .map_err(|e: gaia_core::CoreError| CliError::Config(e.to_string()))?;
            if kinds.contains(&kind) {
                return Err(CliError::Config(format!("duplicate model {name:?}")));
            }
            kinds.push(kind);
        }
        if kinds.is_empty() {
            return Err(CliError::Config("experiment.models is empty".into()));
        }
        kinds.sort_by_key(|k| ModelKind::ALL.iter().position(|m| m == k));
        Ok(kinds)
    }

    /// Parsed dataset list in canonical order, duplicates rejected.
    pub fn dataset_kinds(&self) -> Result<Vec<DatasetKind>> {
        let mut kinds = Vec::new();
        for name in &self.experiment.datasets {
            let kind: DatasetKind = name
                .parse()
                .map_err(|e: gaia_core::CoreError| CliError::Config(e.to_string()))?;
            if kinds.contains(&kind) {
                return Err(CliError::Config(format!("duplicate dataset {name:?}")));
            }
            kinds.push(kind);
        }
        if kinds.is_empty() {
            return Err(CliError::Config("experiment.datasets is empty".into()));
        }
        kinds.sort_by_key(|k| DatasetKind::ALL.iter().position(|d| d == k));
        Ok(kinds)
    }

    pub fn dataset_config(&self, kind: DatasetKind) -> DatasetConfig {
        DatasetConfig {
            kind,
            noise: self.data.noise,
            circle_factor: self.data.circle_factor,
            blob_std: self.data.blob_std,
            blob_centers: self.data.blob_centers,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_dim: self.model.input_dim,
            latent_dim: self.model.latent_dim,
            hidden_layers: self.model.hidden_layers,
            hidden_units: self.model.hidden_units,
        }
    }

    pub fn train_config(&self, kind: ModelKind, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            kind,
            lr: t.lr,
            batch: t.batch,
            steps: t.steps,
            sigmoid_slope: t.sigmoid_slope,
            gamma: t.gamma,
            alpha: t.alpha.unwrap_or(0.5 * t.lr),
            interp_mu: t.interp_mu,
            interp_sigma: t.interp_sigma,
            vae_obs_var: t.vae_obs_var,
            swap_balance: t.swap_balance,
            seed,
        }
    }

    /// Cross-field checks plus delegation to the core validators.
    pub fn validate(&self) -> Result<()> {
        let models = self.model_kinds()?;
        self.dataset_kinds()?;
        if self.data.n_train < 2 || self.data.n_eval < 4 {
            return Err(CliError::Config(format!(
                "n_train must be >= 2 and n_eval >= 4, got {} and {}",
                self.data.n_train, self.data.n_eval
            )));
        }
        if self.train.batch > self.data.n_train {
            return Err(CliError::Config(format!(
                "train.batch {} exceeds data.n_train {}",
                self.train.batch, self.data.n_train
            )));
        }
        if self.eval.knn_k == 0 || self.eval.max_pairs == 0 {
            return Err(CliError::Config(
                "eval.knn_k and eval.max_pairs must be >= 1".into(),
            ));
        }
        if self.eval.knn_k + 1 > self.data.n_eval / 2 {
            return Err(CliError::Config(format!(
                "eval.knn_k {} too large for n_eval {} (each split holds n_eval/2 points)",
                self.eval.knn_k, self.data.n_eval
            )));
        }
        if self.viz.resolution < 2 {
            return Err(CliError::Config("viz.resolution must be >= 2".into()));
        }
        self.model_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for kind in DatasetKind::ALL {
            // Validate shared dataset params once per kind we might touch.
            if self.experiment.datasets.iter().any(|d| d == kind.as_str()) {
                self.dataset_config(kind)
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        for kind in models {
            self.train_config(kind, self.experiment.seed)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
