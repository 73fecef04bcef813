//! Batch front end: configuration files, CSV artifacts and the run driver.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, parse_config_str, GainValue, Guess, Overrides, RunSpec, OUTPUT_DIR_ENV};
pub use output::{emit_csv, Cell, Table};
pub use runner::{run, RunReport};
