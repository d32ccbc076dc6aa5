use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("mode label `{0}` appears in both operands")]
    LabelCollision(String),

    #[error("mode label `{0}` not found")]
    LabelNotFound(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge: {0}")]
    Convergence(String),

    #[error("argument order: {0}")]
    ArgumentOrder(String),

    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),

    #[error("derivative has support outside the unperturbed state: {0}")]
    SupportMismatch(String),

    #[error("invalid measurement basis: {0}")]
    InvalidBasis(String),

    #[error("error-probability hierarchy violated: {0}")]
    HierarchyViolation(String),

    #[error("configuration {index} failed: {source}")]
    Configuration {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable tag used in CLI and FFI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::TruncationTooSmall(_) => "truncation_too_small",
            Error::LabelCollision(_) => "label_collision",
            Error::LabelNotFound(_) => "label_not_found",
            Error::Domain(_) => "domain",
            Error::Convergence(_) => "convergence",
            Error::ArgumentOrder(_) => "argument_order",
            Error::DegenerateMeasurement(_) => "degenerate_measurement",
            Error::SupportMismatch(_) => "support_mismatch",
            Error::InvalidBasis(_) => "invalid_basis",
            Error::HierarchyViolation(_) => "hierarchy_violation",
            Error::Configuration { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
