use alloc::string::String;
use core::fmt;

use crate::element::BasisIndex;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A certified tail bound exceeded `TruncationPolicy::max_tail`.
    /// `tail` is `f64::INFINITY` when the tail could not be bounded at all.
    TailTooLarge { tail: f64, max_tail: f64 },
    /// An accumulated coefficient overflowed or became NaN.
    NonFiniteCoefficient { index: BasisIndex },
    /// Input outside the operation's supported class.
    UnsupportedInput(&'static str),
    /// A Schur weight oracle returned a non-positive weight.
    InvalidWeights { index: BasisIndex, weight: f64 },
    /// The structure map or kernel is not stochastic.
    NotMarkov { index: BasisIndex, detail: String },
    /// Tail propagation was requested without an operator norm bound.
    MissingCertificate,
    /// A builder or policy parameter is out of range.
    InvalidParameter(String),
    /// The same basis index was given twice.
    DuplicateIndex(BasisIndex),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TailTooLarge { tail, max_tail } => {
                write!(f, "tail bound {tail:e} exceeds the admissible maximum {max_tail:e}")
            }
            Error::NonFiniteCoefficient { index } => {
                write!(f, "coefficient at index {index} is not finite")
            }
            Error::UnsupportedInput(what) => write!(f, "unsupported input: {what}"),
            Error::InvalidWeights { index, weight } => {
                write!(f, "weight {weight} at index {index} is not strictly positive")
            }
            Error::NotMarkov { index, detail } => {
                write!(f, "not a Markov structure at index {index}: {detail}")
            }
            Error::MissingCertificate => f.write_str("tail propagation requires an operator norm bound"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DuplicateIndex(i) => write!(f, "duplicate basis index {i}"),
        }
    }
}

impl core::error::Error for Error {}
