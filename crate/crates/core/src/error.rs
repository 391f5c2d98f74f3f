use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("paired estimator needs nX = nY, got nX = {nx}, nY = {ny}")]
    Pairing { nx: usize, ny: usize },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("enumeration needs {requested} evaluations, cap is {cap}")]
    TooLarge { requested: f64, cap: u64 },

    #[error("zeta table has no entry for {0:?}")]
    IncompleteTable(Vec<usize>),

    #[error("degenerate train/test split: {0}")]
    DegenerateSplit(String),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

pub type Result<T> = core::result::Result<T, Error>;
