use std::fmt;

/// Crate-wide error type. Variants carry enough structure for callers to
/// match on the failure class without parsing messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A 4-d shape did not match what the operation required.
    DimMismatch {
        context: &'static str,
        expected: [usize; 4],
        got: [usize; 4],
    },
    /// A buffer, axis, or row-count length did not match.
    LenMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// Transform length is zero or has a prime factor larger than 7.
    UnsupportedSize { n: usize },
    /// Padded transform axis is shorter than the data it must cover.
    TransformTooSmall { n: usize, need: usize },
    /// Spectrum order tag was not what the consumer expects.
    OrderMismatch { context: &'static str },
    /// Tensor layout tag was not what the consumer expects.
    LayoutMismatch { context: &'static str },
    /// Tile length is zero or exceeds the extent it must partition.
    TileOutOfRange { d: usize, limit: usize },
    /// Tensor file did not start with the expected magic bytes.
    BadMagic { got: [u8; 4] },
    /// Tensor file header or payload is malformed.
    FileFormat { message: String },
    /// Text input (plan cache, grid file) failed to parse.
    Parse { line: usize, message: String },
    /// Tuning found no candidate that validates and reproduces the oracle.
    NoViablePlan,
    Io { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                context,
                expected,
                got,
            } => write!(
                f,
                "{context}: expected dims {expected:?}, got {got:?}"
            ),
            Error::LenMismatch {
                context,
                expected,
                got,
            } => write!(f, "{context}: expected length {expected}, got {got}"),
            Error::UnsupportedSize { n } => {
                write!(f, "transform length {n} is not supported (must be 7-smooth and nonzero)")
            }
            Error::TransformTooSmall { n, need } => {
                write!(f, "transform length {n} is smaller than the {need} samples it must cover")
            }
            Error::OrderMismatch { context } => {
                write!(f, "{context}: spectrum order tag does not match")
            }
            Error::LayoutMismatch { context } => {
                write!(f, "{context}: tensor layout tag does not match")
            }
            Error::TileOutOfRange { d, limit } => {
                write!(f, "tile length {d} is outside the valid range 1..={limit}")
            }
            Error::BadMagic { got } => write!(f, "bad tensor file magic {got:?}"),
            Error::FileFormat { message } => write!(f, "tensor file: {message}"),
            Error::Parse { line, message } => write!(f, "line {line}: {message}"),
            Error::NoViablePlan => {
                write!(f, "no candidate plan survived validation and the correctness probe")
            }
            Error::Io { message } => write!(f, "io: {message}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io {
            message: e.to_string(),
        }
    }
}
