use thiserror::Error;

use crate::grid::Role;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {n} must be even and at least 8")]
    InvalidGridSize { n: usize },

    #[error("sample {index} is not finite")]
    NonFinite { index: usize },

    #[error("sample {index} is {value}, expected a positive value")]
    NonPositive { index: usize, value: f64 },

    #[error("expected a {expected:?} function, got {found:?}")]
    RoleMismatch { expected: Role, found: Role },

    #[error("grid sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("integral of f is {integral}, expected 2*pi within {tolerance}")]
    NotNormalized { integral: f64, tolerance: f64 },

    #[error("input is not symmetric decreasing around node {index}")]
    NotArranged { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root not bracketed on [{lo}, {hi}]: residuals {f_lo} and {f_hi}")]
    NoBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("descent diverged: F rose from {initial} to {last}")]
    Diverged { initial: f64, last: f64 },

    #[error("input rejected: {0}")]
    Rejected(String),
}

pub type Result<T> = std::result::Result<T, Error>;
