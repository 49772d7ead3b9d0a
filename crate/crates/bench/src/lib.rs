//! Shared fixtures for the benchmarks under `benches/`.

use ucip_core::qbm::{QbmModel, QbmParams};
use ucip_core::trajgen::{generate_dataset, AgentClass, AgentParams, GridworldConfig, Trajectory};

/// Untrained model with fixed, non-trivial couplings.
pub fn fixture_model(n_hidden: usize) -> QbmModel {
    let mut params = QbmParams::zeros(n_hidden, 0.5, 1.0);
    for i in 0..params.n_visible {
        for j in 0..n_hidden {
            params.weights[(i, j)] = 0.3 * ((i * n_hidden + j) as f64).sin();
        }
    }
    for j in 0..n_hidden {
        params.hidden_bias[j] = 0.1 * (j as f64).cos();
    }
    QbmModel::from_params(params)
}

pub fn fixture_dataset(n_per_class: usize) -> Vec<Trajectory> {
    generate_dataset(
        &GridworldConfig::default(),
        &[AgentClass::TypeA, AgentClass::TypeB],
        n_per_class,
        &AgentParams::default(),
        42,
    )
    .expect("default config is valid")
}
