use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NmdError {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires d = {required}, got d = {found}")]
    WrongDimension { required: usize, found: usize },

    #[error("invalid Weyl index ({m}, {n}) for d = {d}")]
    InvalidIndex { m: usize, n: usize, d: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("k must be positive, got {0}")]
    InvalidK(i64),

    #[error("spectrum is not conjugate-symmetric: imaginary residue {residue:e} in p[{index}] at t = {time}")]
    NonHermitianSpectrum { time: f64, index: usize, residue: f64 },

    #[error("decoherence rates are not real: imaginary residue {residue:e} in gamma[{index}] at t = {time}")]
    NonRealRates { time: f64, index: usize, residue: f64 },

    #[error("spectrum singular: |lambda[{index}]| = {modulus:e} at t = {time}")]
    SpectrumSingularity { time: f64, index: usize, modulus: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl NmdError {
    /// True for failures of the numerical model itself (as opposed to malformed input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            NmdError::NonHermitianSpectrum { .. }
                | NmdError::NonRealRates { .. }
                | NmdError::SpectrumSingularity { .. }
        )
    }
}

impl From<std::io::Error> for NmdError {
    fn from(e: std::io::Error) -> Self {
        NmdError::Io(e.to_string())
    }
}

impl From<csv::Error> for NmdError {
    fn from(e: csv::Error) -> Self {
        NmdError::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for NmdError {
    fn from(e: serde_json::Error) -> Self {
        NmdError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NmdError>;
