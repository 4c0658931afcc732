//! Experiment orchestration: configs, the end-to-end pipeline, sweeps,
//! reports, and figure export.

mod config;
mod export;
mod pipeline;
mod report;

pub use config::{parse_config_text, ExperimentConfig};
pub use export::{export_figures, RunArtifacts};
pub use pipeline::{run_experiment, run_experiment_full, sweep};
pub use report::RunReport;
