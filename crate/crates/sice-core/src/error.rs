use core::fmt;

/// Error type shared by all routines in this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible for the named operation.
    DimMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A square matrix was required.
    NotSquare { rows: usize, cols: usize },
    /// Symmetry check failed; carries the largest |a_ij - a_ji| seen.
    NotSymmetric { max_asym: f64 },
    /// Cholesky pivot was non-positive at the given index.
    NotPositiveDefinite { pivot: usize },
    /// A diagonal entry that must be strictly positive was not.
    NonPositiveDiagonal { index: usize },
    /// Matrix is numerically singular (eigenvalue below the relative cutoff).
    Singular,
    /// Input contained NaN or infinity where finite values are required.
    NonFinite { what: &'static str },
    /// Data length does not match the requested dimensions.
    InvalidLength { expected: usize, got: usize },
    /// A dimension bound was violated.
    InvalidDimension { what: &'static str, got: usize },
    /// A parameter was outside its legal range.
    BadParameter { name: &'static str, value: f64 },
    /// Trace was not strictly positive where trace normalization requires it.
    DegenerateTrace { trace: f64 },
    /// Newton-Schulz iteration produced non-finite values or a residual
    /// growing for three consecutive iterations.
    NsDiverged { iteration: usize },
    /// Newton-Schulz divergence inside the sparse-estimation loop.
    IsiceDiverged {
        isice_iteration: usize,
        ns_iteration: usize,
    },
    /// Iterative eigensolver did not reach its tolerance within the sweep cap.
    NoConvergence { residual: f64 },
    /// Autodiff: referenced node does not exist on this tape.
    NodeOutOfRange { id: usize, len: usize },
    /// Autodiff: an op was applied with the wrong number of parents.
    ArityMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    /// Autodiff: backward requires a 1x1 (scalar) loss node.
    LossNotScalar { rows: usize, cols: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { op, lhs, rhs } => {
                write!(f, "{op}: incompatible shapes {lhs:?} and {rhs:?}")
            }
            Error::NotSquare { rows, cols } => {
                write!(f, "matrix must be square, got {rows}x{cols}")
            }
            Error::NotSymmetric { max_asym } => {
                write!(f, "matrix is not symmetric (max |a_ij - a_ji| = {max_asym:e})")
            }
            Error::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive definite (pivot {pivot} <= 0)")
            }
            Error::NonPositiveDiagonal { index } => {
                write!(f, "diagonal entry {index} must be strictly positive")
            }
            Error::Singular => write!(f, "matrix is numerically singular"),
            Error::NonFinite { what } => write!(f, "{what} contains NaN or infinite values"),
            Error::InvalidLength { expected, got } => {
                write!(f, "data length {got} does not match expected {expected}")
            }
            Error::InvalidDimension { what, got } => {
                write!(f, "invalid dimension for {what}: {got}")
            }
            Error::BadParameter { name, value } => {
                write!(f, "parameter {name} out of range: {value}")
            }
            Error::DegenerateTrace { trace } => {
                write!(f, "trace must be strictly positive, got {trace}")
            }
            Error::NsDiverged { iteration } => {
                write!(f, "Newton-Schulz iteration diverged at step {iteration}")
            }
            Error::IsiceDiverged {
                isice_iteration,
                ns_iteration,
            } => write!(
                f,
                "Newton-Schulz diverged at step {ns_iteration} inside solver iteration {isice_iteration}"
            ),
            Error::NoConvergence { residual } => {
                write!(f, "eigensolver did not converge (residual {residual:e})")
            }
            Error::NodeOutOfRange { id, len } => {
                write!(f, "node id {id} out of range for tape of length {len}")
            }
            Error::ArityMismatch { op, expected, got } => {
                write!(f, "{op} expects {expected} parents, got {got}")
            }
            Error::LossNotScalar { rows, cols } => {
                write!(f, "loss node must be 1x1, got {rows}x{cols}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
