//! Declarative multi-trial experiments: configuration, parallel execution,
//! rate fitting, mode comparison and persistence.

pub mod config;
pub mod io;
pub mod rates;
pub mod runner;

pub use config::{ExperimentConfig, Mode};
pub use rates::{fit_rate, RateFit};
pub use runner::{compare_modes, run_experiment, Row, TrialResult};
