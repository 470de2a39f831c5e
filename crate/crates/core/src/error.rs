use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric supremum could not be certified within the iteration budget.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Constant synthesis could not satisfy one of the proof conditions.
    #[error("synthesis failure: condition {condition} violated: {detail}")]
    Synthesis {
        condition: &'static str,
        detail: String,
    },

    /// The process has no exact oracle (continuous support).
    #[error("unsupported process for exact computation: {0}")]
    UnsupportedSpec(String),

    #[error("fit failure: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn synthesis(condition: &'static str, detail: impl Into<String>) -> Self {
        Error::Synthesis {
            condition,
            detail: detail.into(),
        }
    }
}
