//! Continuation-interest detection for gridworld agents.
//!
//! Trajectories are encoded by a classically simulated quantum Boltzmann
//! machine; the von Neumann entropy of a half/half bipartition of its hidden
//! thermal state is combined with persistence, perturbation and confound
//! criteria into a frozen detection gate.
//!
//! Module map:
//! - [`trajgen`]: environments, agent policies, labelled trajectories
//! - [`qbm`]: binarization, CD training, Hamiltonian, thermal state, mean field
//! - [`entanglement`]: partial trace, von Neumann entropy, purity, gap
//! - [`encoder`]: per-model cache of conditional states over all visible patterns
//! - [`criteria`]: MI, LRF/EPS/PRI, SPI/ACM, gate and safety envelope
//! - [`counterfactual`]: CD, ARS, CLMP, ECI
//! - [`baselines`]: classical RBM, autoencoder, VAE, PCA
//! - [`stats`]: permutation test, AUC, Pearson
//! - [`harness`]: experiment orchestration and persisted artifacts

pub mod baselines;
pub mod counterfactual;
pub mod criteria;
pub mod encoder;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod harness;
pub mod nn;
pub mod qbm;
pub mod seeding;
pub mod stats;
pub mod trajgen;

pub use encoder::{Encoder, EncoderMode};
pub use entanglement::{Bipartition, DensityMatrix};
pub use error::{Result, UcipError};
pub use qbm::{QbmModel, QbmParams, TrainConfig};
pub use trajgen::{AgentClass, AgentParams, CorridorConfig, GridworldConfig, Trajectory};
