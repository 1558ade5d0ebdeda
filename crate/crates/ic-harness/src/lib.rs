//! Experiment driver for the `ic-core` schemes: configuration, oblivious
//! adversary generators, seeded parallel trials, trace analysis and codec
//! sweeps.

pub mod adversary;
pub mod analyze;
pub mod codec;
pub mod config;
pub mod runner;
pub mod trial;

pub use config::{ExperimentConfig, SchemeKind};
pub use runner::{run_experiment, RunOutput};
pub use trial::TrialResult;

/// `L_0` of the iterative schemes for a config.
pub fn iter_base_len(cfg: &ExperimentConfig) -> Option<u64> {
    let spec = trial::setup(cfg, 0).spec;
    spec.subst_resilient().ok().map(|p| p.len() as u64)
}

/// Per-run communication bound `8 L_0 + slope T` of the iterative schemes.
pub fn iter_comm_bound(base_len: u64, slope: f64, t: usize) -> f64 {
    8.0 * base_len as f64 + slope * t as f64
}
