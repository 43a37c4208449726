use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An allocation clashed with spectrum already in use.
    #[error("spectrum conflict: {0}")]
    Conflict(String),

    /// A referenced entity (connection, node, file section) does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// The demand cannot fit on any link even on an empty network.
    #[error("infeasible demand: {0}")]
    InfeasibleDemand(String),

    /// The instance exceeds the enumeration guard of the exact solver.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// A text input (topology, trace, config, LP, solution) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    /// An external solver process could not be run or returned garbage.
    #[error("solver unavailable: {0}")]
    SolverUnavailable(String),

    /// Two ledgers or file schemas that must match do not.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
