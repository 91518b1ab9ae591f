//! Experiment orchestration: game catalog, configuration, seeded sweeps over
//! horizons, CSV/JSON persistence and log-log slope fits.

mod catalog;
mod config;
mod experiment;

pub use catalog::{catalog, catalog_entry, CatalogEntry};
pub use config::{ExperimentConfig, ParamSpec, SeedSpec};
pub use experiment::{
    classify, default_checkpoints, fit_slope, resolve_game, run_experiment, run_sweep,
    write_results, Classification, RunResult, SlopeFit, Summary, SweepResult, CSV_HEADER,
};
