use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFiniteInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("loss domain error: {0}")]
    Domain(String),

    #[error("imaginary residue {residue:.3e} exceeds tolerance {tolerance:.3e}")]
    ImaginaryLeakage { residue: f64, tolerance: f64 },

    #[error("spectral solver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("gradient vanishes")]
    ZeroGradient,

    #[error("sketch least-squares system is numerically rank deficient")]
    RankDeficientPsiQ,

    #[error("dense storage of {0} entries exceeds the reference guard")]
    TooLargeForDense(usize),

    #[error("reference vector is zero")]
    ZeroTruth,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("index out of range at line {line}: {message}")]
    IndexOutOfRange { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for each variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Domain(_) => "DomainError",
            Error::ImaginaryLeakage { .. } => "ImaginaryLeakage",
            Error::NoConvergence(_) => "NoConvergence",
            Error::ZeroGradient => "ZeroGradient",
            Error::RankDeficientPsiQ => "RankDeficientPsiQ",
            Error::TooLargeForDense(_) => "TooLargeForDense",
            Error::ZeroTruth => "ZeroTruth",
            Error::Parse { .. } => "ParseError",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::Io(_) => "Io",
        }
    }

    /// Line number for file-format errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Parse { line, .. } | Error::IndexOutOfRange { line, .. } => Some(*line),
            _ => None,
        }
    }
}

pub(crate) fn ensure_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
