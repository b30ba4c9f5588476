//! Argument types, object construction and JSON/CSV reports for the `porous` binary.

pub mod args;
pub mod objects;
pub mod report;
pub mod run;

pub use report::{report_schema_version, Report, SCHEMA_VERSION};
pub use run::{run, Outcome, EXIT_CHECK, EXIT_INVALID, EXIT_OK};
