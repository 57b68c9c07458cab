//! Experiment harness: flat configuration, dispatch to the numerical core,
//! and reproducible CSV/JSON artifacts with a hash manifest.

pub use fraclat_core as core;

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;
pub mod selftest;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::run;
pub use report::{Check, ExperimentReport};
pub use selftest::{self_test, self_test_with, SelfTestOptions};
