//! Benchmark harness and roofline calculator built on `sparsexec-core`.
//!
//! Drivers live in [`harness`]; they return [`BenchRecord`]s which
//! [`report`] turns into JSON, CSV or an SVG scatter plot.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod record;
pub mod report;
pub mod roofline;

pub use error::{BenchError, BenchResult};
pub use record::{BenchRecord, RecordStatus};
pub use roofline::{compute_bounds, RooflineModel, SpmvFormat};
