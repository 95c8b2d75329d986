//! Error taxonomy shared by every module.
//!
//! Recoverable conditions are reported as [`Error`] values; panics are
//! reserved for internal invariant violations (bugs in this crate).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure this crate reports.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible operand shapes, naming the graph node that failed.
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    ShapeMismatch {
        node: usize,
        op: &'static str,
        detail: String,
    },

    /// A forward pass produced NaN or infinity.
    #[error("non-finite value produced at node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },

    /// Reverse accumulation was requested from a non-scalar node.
    #[error("gradient root must be scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },

    /// `forward` was called without a value for a named leaf.
    #[error("no binding supplied for leaf '{0}'")]
    UnboundLeaf(String),

    /// An optimizer step received a NaN/infinite gradient.
    #[error("non-finite gradient for parameter '{0}'")]
    NonFiniteGrad(String),

    /// A parameter name was not found where one was required.
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),

    /// Head placements violate the model invariants.
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    /// A named placement scheme is not defined for the requested depth.
    #[error("unsupported placement scheme: {0}")]
    UnsupportedScheme(String),

    /// A confidence criterion does not apply to the task at hand.
    #[error("unsupported confidence criterion: {0}")]
    UnsupportedCriterion(String),

    /// A caller-supplied value is out of its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Mismatched vector/matrix extents outside the graph (weights,
    /// metrics, checkpoints, ...).
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// Training loss became non-finite or exceeded the divergence limit.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// No operating point on the calibration grid fits the budget.
    #[error("infeasible budget {budget}: cheapest operating point costs {cheapest}")]
    InfeasibleBudget { budget: f64, cheapest: f64 },

    /// Malformed input data (CSV cell, config field, ...), with the
    /// 1-based line where it was found.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// A checkpoint failed magic, checksum, length, or manifest checks.
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    /// A checkpoint was written by an incompatible format version.
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    /// Invalid run configuration (schema violation, contradictory fields).
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than
    /// by computation itself. The CLI maps these to exit code 2 and all
    /// other errors to exit code 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidPlacement(_)
                | Error::UnsupportedScheme(_)
                | Error::UnsupportedCriterion(_)
                | Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::UnsupportedVersion(_)
                | Error::InfeasibleBudget { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        Error::Parse {
            line,
            detail: e.to_string(),
        }
    }
}
