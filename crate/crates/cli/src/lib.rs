//! Configuration-driven experiment runner: propagates the selected gauges,
//! extracts the conductivity and writes CSV trajectories and a JSON report.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use output::{emit_csv, emit_report, CSV_HEADER};
pub use run::{run_experiment, Check, CheckStatus, ExperimentReport, GaugeReport};
