//! Experiment runner for the `mnpcomm` link models: configuration, sweeps,
//! validation and CSV output.

pub mod config;
pub mod experiments;
pub mod table;
pub mod validate;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::{
    run_impulse_response, run_magnetization_curve, run_ser_sweep, ImpulseSweep, MagnetizationSweep, SerSweep,
};
pub use table::{Cell, ResultTable};
pub use validate::{run_checks, run_validate, Check};
