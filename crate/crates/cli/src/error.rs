use std::fmt;

/// CLI failure classes, each mapped to a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation syntax: unknown flag, missing value, unparsable number.
    Usage(String),
    /// Syntactically fine but semantically invalid configuration.
    Validation(String),
    /// A solver-level failure.
    Numerical(fracell::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(message) => write!(f, "usage error: {message}"),
            CliError::Validation(message) => write!(f, "invalid configuration: {message}"),
            CliError::Numerical(error) => write!(f, "numerical failure: {error}"),
            CliError::Io(error) => write!(f, "io error: {error}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fracell::Error> for CliError {
    fn from(error: fracell::Error) -> Self {
        use fracell::Error::*;
        match error {
            // faults in user-provided input, not in the numerics
            Parse { .. } | Topology(_) | InvalidParameter { .. } | RefinementTooCoarse { .. }
            | DeltaTooLarge { .. } => CliError::Validation(error.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(error: std::io::Error) -> Self {
        CliError::Io(error)
    }
}
