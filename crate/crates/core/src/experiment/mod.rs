//! Configuration, trial orchestration, sweeps, persistence and analysis.

pub mod analysis;
mod config;
pub mod io;
mod runner;
mod sweep;

pub use config::{
    AgentConfig, Architecture, ExperimentConfig, RunConfig, StepSizes, SweepParam, SweepSpec,
};
pub use runner::{
    run_parallel, run_trial, run_trials, setup_trial, snapshot_bank, TrialResult, TrialSetup,
    WeightSnapshot,
};
pub use sweep::{cell_config, run_sweep, summarize, SweepRow};
