use thiserror::Error;

/// Errors raised while parsing or evaluating expressions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("function `{name}` expects {expected} argument(s), found {found}")]
    Arity {
        name: String,
        expected: String,
        found: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("variable `{0}` is outside the declared dimensions")]
    VariableOutOfRange(String),
}

/// Errors raised by the reachability library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid interval matrix: {0}")]
    InvalidMatrix(String),
    #[error("infinite entry at ({row}, {col})")]
    InfiniteEntry { row: usize, col: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("Taylor series precondition violated: |C|*tau = {norm} must be below {limit}")]
    TaylorDivergence { norm: f64, limit: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("trajectory diverged (non-finite state) at t = {time}")]
    Divergence { time: f64 },
    #[error("missing capability: {0}")]
    MissingCapability(String),
    #[error("no applicable method: {0}")]
    NoApplicableMethod(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("soundness check failed: {0}")]
    Soundness(String),
    #[error("sampling and falsification is refused for n_x = {n_x} above the dimension cap {cap}: the number of samples needed grows exponentially with the dimension")]
    DimensionCap { n_x: usize, cap: usize },
    #[error("sampling failed: {0}")]
    Sampling(String),
}

pub type Result<T, E = ReachError> = std::result::Result<T, E>;
