use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluated at its singular point z = 0")]
    SingularPoint,
    #[error("gamma = {0} must lie in (-2, 0)")]
    GammaOutOfRange(f64),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("Gaussian weight overflows at the velocity boundary (exponent {0:.3e})")]
    Overflow(f64),
    #[error("distribution has negative value {value:.3e} (max {max:.3e})")]
    NegativeInput { value: f64, max: f64 },
    #[error("collision substep needs {needed} sub-cycles, cap is {cap}")]
    CflViolation { needed: usize, cap: usize },
    #[error("non-finite value detected at t = {0}")]
    NanDetected(f64),
    #[error("cumulative clipped mass {clipped:.3e} exceeds {limit:.3e}")]
    ClippingExceeded { clipped: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("fit window holds {found} points, need at least {needed}")]
    InsufficientPoints { found: usize, needed: usize },
    #[error("non-positive value {value:.3e} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },
    #[error("derivative order {order} exceeds the diagnostic limit {limit}")]
    OrderTooHigh { order: usize, limit: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("traveling Maxwellian constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("field has zero mass")]
    ZeroMass,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("nu = {nu} outside the range of the {branch} branch")]
    BranchMismatch { nu: f64, branch: &'static str },
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Module that raised the error, used to qualify CLI messages.
    pub fn module(&self) -> &'static str {
        match self {
            Error::SingularPoint => "kernel",
            Error::GammaOutOfRange(_) | Error::OrderTooHigh { .. } => "diagnostics",
            Error::UnsupportedDimension(_) | Error::Overflow(_) => "phase_state",
            Error::NegativeInput { .. } => "coefficients",
            Error::CflViolation { .. }
            | Error::NanDetected(_)
            | Error::ClippingExceeded { .. } => "stepper",
            Error::ConfigInvalid(_) | Error::ParseError { .. } => "cli",
            Error::InsufficientPoints { .. }
            | Error::NonPositiveValue { .. }
            | Error::GridMismatch(_) => "diagnostics",
            Error::ConstraintViolated(_) | Error::ZeroMass => "maxwellian",
            Error::QuadratureFailure(_) | Error::BranchMismatch { .. } => "oracles",
            Error::Checkpoint(_) | Error::Io(_) | Error::Json(_) => "cli",
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Error::SingularPoint => "SingularPoint",
            Error::GammaOutOfRange(_) => "GammaOutOfRange",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::Overflow(_) => "Overflow",
            Error::NegativeInput { .. } => "NegativeInput",
            Error::CflViolation { .. } => "CflViolation",
            Error::NanDetected(_) => "NanDetected",
            Error::ClippingExceeded { .. } => "ClippingExceeded",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::ParseError { .. } => "ParseError",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::NonPositiveValue { .. } => "NonPositiveValue",
            Error::OrderTooHigh { .. } => "OrderTooHigh",
            Error::GridMismatch(_) => "GridMismatch",
            Error::ConstraintViolated(_) => "ConstraintViolated",
            Error::ZeroMass => "ZeroMass",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::BranchMismatch { .. } => "BranchMismatch",
            Error::Checkpoint(_) => "Checkpoint",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// `module::Variant: message`
    pub fn qualified(&self) -> String {
        format!("{}::{}: {}", self.module(), self.variant_name(), self)
    }
}
