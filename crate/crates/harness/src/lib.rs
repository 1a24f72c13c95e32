//! Experiment harness: configuration presets, the experiments themselves, and JSON reports
//! with explicit pass/fail gates.

pub mod config;
pub mod experiments;
pub mod report;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::run;
pub use report::{ExperimentReport, Gate, Relation, Verdict};
