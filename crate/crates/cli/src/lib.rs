//! Command-line front end: problem files, the built-in traffic benchmark,
//! Monte-Carlo validation and artifact emission.

pub mod error;
pub mod problem;
pub mod report;
pub mod run;
pub mod traffic;
pub mod validate;

pub use error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BOXREACH_OUT_DIR";
