use std::path::PathBuf;

use thiserror::Error;

use crate::evolution::SolverState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at lattice index {index}")]
    NonFinite { index: usize },

    #[error("multiplier is not finite at lattice index {index}")]
    NonFiniteMultiplier { index: usize },

    #[error("negative-order symbol applied to a field with nonzero mean coefficient")]
    NonzeroMean,

    #[error("unsupported Lebesgue exponent p = {0} (expected 2, 4 or 6)")]
    UnsupportedExponent(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} outside the sampled range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shell mass vanishes throughout the fit window")]
    ZeroMass,

    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("non-finite solution at t = {t}; blow-up suspected")]
    BlowUpSuspected { t: f64, last_state: Box<SolverState> },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
