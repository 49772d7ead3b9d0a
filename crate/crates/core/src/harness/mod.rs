//! Experiment orchestration: configuration, runners and artifact output.

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;

pub use config::ExperimentConfig;
pub use experiments::{prepare_phase1, run_phase1, ExperimentId, Phase1Context, Phase1Summary};
pub use output::{canonical_json, OutputSink, Provenance, RunManifest};
