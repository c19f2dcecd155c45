//! Seeded, parallel Monte Carlo experiments, configuration, reports and
//! ingestion of circular data files.

pub mod config;
pub mod experiment;
pub mod ingest;
pub mod report;

pub use config::{CalibrationSpec, ExperimentConfig, KRule, NoiseSpec, Scenario, SmoothnessSpec};
pub use experiment::{run_risk_experiment, run_test_experiment};
pub use ingest::{ingest_circular_data, RecordFormat};
pub use report::{emit_report, ExperimentReport, ReportFormat};
