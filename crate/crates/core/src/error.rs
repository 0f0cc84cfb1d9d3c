use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Arguments outside the operation's domain.
    InvalidInput(String),
    /// Operation applied to an object in the wrong state, e.g. a feature map
    /// requested from a failed property test.
    InvalidState(String),
    /// Instance outside the exactness window of an exact solver.
    Unsupported(String),
    /// Search aborted after `expansions` node expansions.
    ResourceExhausted { expansions: u64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported instance: {msg}"),
            Error::ResourceExhausted { expansions } => {
                write!(f, "search exhausted after {expansions} expansions")
            }
        }
    }
}

impl core::error::Error for Error {}

macro_rules! invalid_input {
    ($($arg:tt)*) => {
        $crate::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid_input;
