use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A lottery or parameter violates a structural invariant.
    InvalidLottery(String),
    InvalidParameter(String),
    /// Outcome outside the support of the utility family (CRRA needs x > 0).
    Domain { outcome: f64 },
    /// A root or bracket search did not finish.
    NonConvergence(String),
    /// More than one sign change where a unique threshold was required.
    AmbiguousThreshold { crossings: Vec<f64> },
    /// The random parameter model is undefined for this pair's crossing pattern.
    RpmOrientation(String),
    UnsupportedModel(String),
    DimensionMismatch { expected: usize, found: usize },
    InvalidDataset(String),
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidLottery(msg) => write!(f, "invalid lottery: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Domain { outcome } => {
                write!(f, "outcome {outcome} is outside the utility support")
            }
            Error::NonConvergence(msg) => write!(f, "no convergence: {msg}"),
            Error::AmbiguousThreshold { crossings } => {
                write!(f, "{} indifference crossings found: {crossings:?}", crossings.len())
            }
            Error::RpmOrientation(msg) => write!(f, "random parameter model: {msg}"),
            Error::UnsupportedModel(msg) => write!(f, "unsupported model: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} parameter entries, found {found}")
            }
            Error::InvalidDataset(msg) => write!(f, "invalid dataset: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
