//! Metrics, the instance store, ablation runs and the command-line surface.

pub mod ablation;
pub mod cli;
pub mod metrics;
pub mod store;
