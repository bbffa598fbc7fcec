//! Experiment harness for the `tvclt` toolkit: TOML configs, parallel
//! case execution and CSV, JSON and SVG reports.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{load_config, parse_config, save_config, to_toml, ConfigError, ExperimentConfig, Format};
pub use emit::{emit, to_csv, to_json, CSV_HEADER};
pub use run::{check_identities, run, run_cases, CaseReport, RunReport};
