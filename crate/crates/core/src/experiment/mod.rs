//! Scenario configuration, orchestration and persistence.

pub mod config;
pub mod io;
pub mod report;
pub mod runner;

pub use config::{PretrainConfig, ScenarioConfig, TargetSet, Variant, PRESETS};
pub use report::{emit_report, Report};
pub use runner::{
    prepare, pretrain, run_scenario, run_variant, Prepared, RunManifest, RunOptions, VariantResult,
};
