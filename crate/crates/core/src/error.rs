use thiserror::Error;

use crate::solver::Field;

pub type Result<T> = std::result::Result<T, SpdeError>;

/// Hypotheses a coefficient set is checked against at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::H1 => "(H1)",
            Hypothesis::H2 => "(H2)",
            Hypothesis::H3 => "(H3)",
            Hypothesis::H4 => "(H4)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum SpdeError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{hypothesis} violated at t={t}, x={x}, r={r}: {detail}")]
    Hypothesis {
        hypothesis: Hypothesis,
        t: f64,
        x: f64,
        r: f64,
        detail: String,
    },

    #[error("numerical blow-up at t={t}")]
    BlowUp { t: f64, last: Box<Field> },

    #[error("tangent blow-up at t={t}")]
    TangentBlowUp { t: f64 },

    #[error("noise replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SpdeError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SpdeError::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SpdeError::Domain(msg.into())
    }
}
