use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand dimensions are incompatible.
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// An argument is outside its valid domain.
    Argument(String),
    /// Input data is malformed, non-finite, or inconsistent.
    Data(String),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Shape {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                found,
            } => write!(
                f,
                "shape error in {context}: expected dimension {expected}, found {found}"
            ),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Data(msg) => write!(f, "invalid data: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
