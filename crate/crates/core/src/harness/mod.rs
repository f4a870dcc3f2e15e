//! Experiment orchestration: TOML configs, seeded repetitions, horizon and
//! learning-rate sweeps, CSV output.

mod config;
mod results;
mod runner;
mod seed;
mod sweep;

pub use config::{default_lr_grid, Aggregate, ExperimentConfig, RunSettings};
pub use results::{
    compare_rows, config_hash, sort_rows, write_results, write_trajectory, ResultRow, RunStatus,
};
pub use runner::{run_single, RunOutcome, RunSpec};
pub use seed::{child_seed, splitmix64};
pub use sweep::{
    run_sweep, run_sweep_with, AlgorithmFit, CellSummary, RunDiagnostics, SweepOutcome,
};
