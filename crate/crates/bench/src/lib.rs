//! Experiment harness for stopped Cholesky log-determinant estimation:
//! sweep configuration, timed runs with the relative-time metric `m`, and
//! CSV / JSON-lines reports.

pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use config::{Algorithm, DataSource, RunConfig};
pub use error::{BenchError, Result};
pub use report::{emit_report, ReportFormat};
pub use sweep::{run_sweep, RunRecord};
