use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FinslerError {
    #[error("tangent vector is zero")]
    ZeroVector,

    #[error("point {point:?} lies outside the domain box")]
    OutOfDomain { point: Vec<f64> },

    #[error("degenerate metric at {point:?}: {reason}")]
    DegenerateSpec { point: Vec<f64>, reason: String },

    #[error("parameter {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid input in field `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("fundamental tensor not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("curve leaves the domain box at t = {t}")]
    CurveLeavesDomain { t: f64 },

    #[error("F drift {drift:e} exceeds the allowed {allowed:e}")]
    DriftExceeded { drift: f64, allowed: f64 },

    #[error("quadrature unstable: refinement changed the result by {delta:e} (allowed {allowed:e})")]
    QuadratureUnstable { delta: f64, allowed: f64 },

    #[error("parameter vector {theta:?} gives an invalid metric: {reason}")]
    InvalidInstance { theta: Vec<f64>, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<FinslerError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl FinslerError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FinslerError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        FinslerError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &FinslerError {
        match self {
            FinslerError::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            FinslerError::NotPositiveDefinite { .. }
                | FinslerError::DriftExceeded { .. }
                | FinslerError::QuadratureUnstable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FinslerError>;

pub(crate) trait ResultExt<T> {
    fn context(self, context: &str) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: &str) -> Result<T> {
        self.map_err(|e| e.context(context))
    }
}
