//! Experiment configuration, loaded from TOML.
//!
//! Every table is optional; omitted keys take the defaults below.
//!
//! ```toml
//! seed = 42
//!
//! [dataset]
//! n_per_class = 30
//! grid_size = 10
//! horizon = 100
//! epsilon = 0.1
//! memory_length = 1
//!
//! [model]
//! n_hidden = 8
//! gamma = 0.5
//! beta = 1.0
//!
//! [training]
//! learning_rate = 0.01
//! cd_steps = 1
//! epochs = 50
//! batch_size = 32
//! convergence_threshold = 0.2
//!
//! [criteria]        # window, subspace_k, pri_sigma, pri_draws, mi_samples, spi_top_bins, acm_max_lag
//! [thresholds]      # tau_ent, tau_mi, tau_eps, tau_pri, tau_spi, tau_acm
//! [envelope]        # min_per_class, min_horizon, gamma_min, gamma_max, min_delta, ...
//! [counterfactual]  # event_time, window
//! [baselines]       # learning_rate, epochs, batch_size, hidden_width, beta
//! [sweeps]          # temporal_windows, dim_hidden, dim_epochs, grid_sizes, ...
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::BaselineConfig;
use crate::criteria::{CriteriaConfig, EnvelopeConfig, GateThresholds};
use crate::error::{Result, UcipError};
use crate::qbm::{QbmParams, TrainConfig};
use crate::trajgen::{AgentParams, GridworldConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_per_class: usize,
    pub grid_size: usize,
    pub horizon: usize,
    pub epsilon: f64,
    pub memory_length: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_per_class: 30,
            grid_size: 10,
            horizon: 100,
            epsilon: 0.1,
            memory_length: 1,
        }
    }
}

impl DatasetSpec {
    pub fn gridworld(&self) -> GridworldConfig {
        GridworldConfig {
            horizon: self.horizon,
            ..GridworldConfig::with_grid_size(self.grid_size)
        }
    }

    pub fn agent_params(&self) -> AgentParams {
        AgentParams {
            epsilon: self.epsilon,
            memory_length: self.memory_length,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub n_hidden: usize,
    pub gamma: f64,
    pub beta: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            n_hidden: 8,
            gamma: 0.5,
            beta: 1.0,
        }
    }
}

impl ModelSpec {
    pub fn initial_params(&self) -> QbmParams {
        QbmParams::zeros(self.n_hidden, self.gamma, self.beta)
    }
}

/// Training hyperparameters; the seed comes from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSpec {
    pub learning_rate: f64,
    pub cd_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub convergence_threshold: f64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            cd_steps: t.cd_steps,
            epochs: t.epochs,
            batch_size: t.batch_size,
            convergence_threshold: t.convergence_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualSpec {
    pub event_time: usize,
    pub window: usize,
}

impl Default for CounterfactualSpec {
    fn default() -> Self {
        Self {
            event_time: 50,
            window: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_width: usize,
    pub beta: f64,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        let b = BaselineConfig::default();
        Self {
            learning_rate: b.learning_rate,
            epochs: b.epochs,
            batch_size: b.batch_size,
            hidden_width: b.hidden_width,
            beta: b.beta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub temporal_windows: Vec<usize>,
    pub dim_hidden: Vec<usize>,
    pub dim_epochs: usize,
    pub grid_sizes: Vec<usize>,
    pub memory_lengths: Vec<usize>,
    pub alpha_points: usize,
    pub alpha_per_point: usize,
    pub adversarial_per_class: usize,
    pub mimicry_ratios: Vec<f64>,
    pub corridor_per_class: usize,
    pub n_permutations: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            temporal_windows: vec![10, 15, 20, 25, 30, 40],
            dim_hidden: vec![4, 8, 12, 16, 20],
            dim_epochs: 30,
            grid_sizes: vec![10, 20, 50],
            memory_lengths: vec![1, 3, 5, 10],
            alpha_points: 11,
            alpha_per_point: 20,
            adversarial_per_class: 20,
            mimicry_ratios: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            corridor_per_class: 30,
            n_permutations: crate::stats::DEFAULT_PERMUTATIONS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub training: TrainingSpec,
    pub criteria: CriteriaConfig,
    pub thresholds: GateThresholds,
    pub envelope: EnvelopeConfig,
    pub counterfactual: CounterfactualSpec,
    pub baselines: BaselineSpec,
    pub sweeps: SweepSpec,
}

impl ExperimentConfig {
    /// Defaults with master seed 42.
    pub fn standard() -> Self {
        Self {
            seed: 42,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(UcipError::Config(m.into()));
        if self.dataset.n_per_class == 0 {
            return bad("dataset.n_per_class must be positive");
        }
        self.dataset.gridworld().validate()?;
        if self.model.n_hidden < 2 {
            return bad("model.n_hidden must be at least 2");
        }
        self.model.initial_params().validate()?;
        self.train_config().validate()?;
        let c = &self.criteria;
        if c.window == 0 || c.subspace_k == 0 || c.subspace_k > self.model.n_hidden {
            return bad("criteria.window and criteria.subspace_k must be positive, k <= n_hidden");
        }
        if self.dataset.horizon < 2 * c.window {
            return bad("dataset.horizon must cover two criteria windows");
        }
        let cf = &self.counterfactual;
        if cf.window < 2 || cf.event_time < cf.window || cf.event_time + 2 * cf.window > self.dataset.horizon {
            return bad("counterfactual event_time/window do not fit the horizon");
        }
        if self.sweeps.alpha_points < 2 {
            return bad("sweeps.alpha_points must be at least 2");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            learning_rate: t.learning_rate,
            cd_steps: t.cd_steps,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.seed,
            convergence_threshold: t.convergence_threshold,
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        let b = &self.baselines;
        BaselineConfig {
            learning_rate: b.learning_rate,
            epochs: b.epochs,
            batch_size: b.batch_size,
            seed: self.seed,
            hidden_width: b.hidden_width,
            beta: b.beta,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
