use boxreach::ReachError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    /// The problem could not be built (bad dimensions, invalid model data).
    #[error(transparent)]
    Model(#[from] ReachError),
    #[error("solver failed: {0}")]
    Solver(ReachError),
    #[error("soundness failure: {0}")]
    Unsound(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Schema { .. } | CliError::Model(_) => 2,
            CliError::Solver(_) | CliError::Unsound(_) | CliError::Output(_) => 1,
        }
    }
}
