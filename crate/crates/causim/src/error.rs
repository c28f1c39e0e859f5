//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A specification violates one of its structural invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Vector fields of a specification disagree on length.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The treatment is fully explained by the conditioning set (zero
    /// residual variance), so a probability limit or asymptotic variance
    /// is undefined.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// The naive estimator has exactly zero asymptotic bias, so the
    /// bias-amplification ratio is undefined.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    /// A direct-effect intervention would require a negative error
    /// variance; the message names the violated constraint.
    #[error("infeasible intervention: {0}")]
    Infeasible(String),

    /// The regression design matrix is rank deficient.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// A calibration target could not be bracketed with non-negative
    /// parameter values.
    #[error("bracketing failed: {0}")]
    Bracketing(String),

    /// An optimizer produced a non-finite objective.
    #[error("divergent optimization: {0}")]
    Divergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
