use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A mesh file could not be parsed.
    Parse { line: usize, message: String },
    /// Mesh connectivity violates a structural invariant.
    Topology(String),
    /// The cut-square generator had to move a boundary node farther along
    /// the radius than its incident edges allow to reach the arc.
    RefinementTooCoarse { node: usize, moved: f64, limit: f64 },
    /// Vector or matrix dimensions do not match.
    DimensionMismatch { expected: usize, found: usize },
    /// An iterative solver stopped before reaching its tolerance.
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// CG detected p^T A p <= 0: the matrix is not positive definite.
    Breakdown { ptap: f64 },
    /// A triangle with (near-)zero area was passed to assembly.
    DegenerateElement { triangle: usize, area: f64 },
    /// Requested delta exceeds lambda_min, so K - delta*M would be indefinite.
    DeltaTooLarge { delta: f64, lambda_min: f64 },
    /// Dense Cholesky hit a non-positive pivot: the matrix is not SPD.
    CholeskyFailure { pivot_index: usize, pivot: f64 },
    /// The cyclic Jacobi eigensolver exhausted its sweep budget.
    JacobiNotConverged { off_diagonal: f64, sweeps: usize },
    /// A monitored stability bound failed; this signals an implementation bug,
    /// not a property of the input.
    StabilityMonitorViolation { step: usize, message: String },
    /// A parameter is outside its admissible range.
    InvalidParameter { name: &'static str, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Topology(message) => write!(f, "mesh topology error: {message}"),
            Error::RefinementTooCoarse { node, moved, limit } => write!(
                f,
                "mesh too coarse: node {node} moved {moved:.3e} onto the arc (limit {limit:.3e})"
            ),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotConverged {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::Breakdown { ptap } => {
                write!(f, "CG breakdown: p^T A p = {ptap:.3e} <= 0, matrix not SPD")
            }
            Error::DegenerateElement { triangle, area } => {
                write!(f, "degenerate element: triangle {triangle} has area {area:.3e}")
            }
            Error::DeltaTooLarge { delta, lambda_min } => write!(
                f,
                "delta {delta:.12e} exceeds lambda_min {lambda_min:.12e}: K - delta*M indefinite"
            ),
            Error::CholeskyFailure { pivot_index, pivot } => write!(
                f,
                "Cholesky failure at row {pivot_index}: pivot {pivot:.3e} not positive"
            ),
            Error::JacobiNotConverged {
                off_diagonal,
                sweeps,
            } => write!(
                f,
                "Jacobi eigensolver: off-diagonal norm {off_diagonal:.3e} after {sweeps} sweeps"
            ),
            Error::StabilityMonitorViolation { step, message } => {
                write!(f, "stability monitor violated at step {step}: {message}")
            }
            Error::InvalidParameter { name, message } => {
                write!(f, "invalid parameter `{name}`: {message}")
            }
        }
    }
}

impl std::error::Error for Error {}
