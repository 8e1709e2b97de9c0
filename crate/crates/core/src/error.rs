use thiserror::Error;

/// Errors raised by the engine.
///
/// Statistical or assumption violations found by the checkers are report
/// entries, not errors; this type covers invalid input and numeric failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid counting path: {0}")]
    InvalidPath(String),

    #[error("query time {time} lies beyond the path horizon {horizon}")]
    OutOfRange { time: f64, horizon: f64 },

    #[error("invalid fdd query: {0}")]
    InvalidQuery(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{operation} is not supported for {law}")]
    Unsupported { operation: &'static str, law: String },

    #[error("transform {transform} is undefined on part of the support {support}")]
    Domain { transform: String, support: String },

    #[error("parameter {theta} lies in the declared null set of the kernel")]
    NullSet { theta: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error(
        "quadrature did not converge on [{lower}, {upper}]: value {value:e}, error estimate {error:e} after {evaluations} evaluations"
    )]
    QuadratureNonConvergence {
        lower: f64,
        upper: f64,
        value: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("path {path_index} produced more than {limit} events before the horizon")]
    Explosion { path_index: u64, limit: usize },

    #[error("event undecidable: horizon {horizon} is shorter than the required window {required}")]
    UndecidableEvent { horizon: f64, required: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("check {check}: {source}")]
    Check {
        check: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches a check id, keeping the underlying cause.
    pub fn in_check(self, check: impl Into<String>) -> Self {
        Error::Check {
            check: check.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping check-id wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Check { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidPath(_)
                | Error::OutOfRange { .. }
                | Error::InvalidQuery(_)
                | Error::InvalidParameter(_)
                | Error::Unsupported { .. }
                | Error::Domain { .. }
                | Error::UndecidableEvent { .. }
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
