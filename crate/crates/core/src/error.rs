use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("patch dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid rate function: {0}")]
    InvalidRate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("time step too coarse: patch {patch} has rate supremum {sup} > m = {m}")]
    TimestepTooCoarse { patch: usize, sup: f64, m: f64 },

    #[error("horizon: m*T = {0} is not an integer number of steps")]
    NonIntegerSteps(f64),

    #[error("state space too large: n = {n} exceeds exact-computation limit {limit}")]
    StateSpaceTooLarge { n: usize, limit: usize },

    #[error("ode step too coarse: {0}")]
    OdeUnstable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
