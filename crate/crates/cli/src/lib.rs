//! Command-line driver: demos, reports and benchmarks over `qfhe-core`.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{Failure, Outcome};
pub use config::{Format, Overrides, Settings};
pub use report::{render_report, RenderFormat, RunReport};
