use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the laboratory core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    InvalidArgument(String),
    DimensionMismatch { expected: usize, found: usize },
    ModulusMismatch { expected: u64, found: u64 },
    SingularMatrix,
    LinearlyDependent,
    NotFibonacci(u64),
    OutsideDomain(String),
    AddressOutOfRange { address: u64, word_bits: u32 },
    ValueOverflow { value: u128, word_bits: u32 },
    NonMonotonicEpoch { current: u32, requested: u32 },
    MemoryFrozen,
    ConstructionFailure { k: usize, witness: Vec<usize> },
    UpdateBoundExceeded { op: usize, probes: usize, declared: usize },
    QueryBoundExceeded { probes: usize, declared: usize },
    WrongOperationKind(&'static str),
    NotFound(String),
    Integrity(String),
    Malformed(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ModulusMismatch { expected, found } => {
                write!(f, "modulus mismatch: expected {expected}, found {found}")
            }
            Error::SingularMatrix => f.write_str("singular matrix"),
            Error::LinearlyDependent => f.write_str("vectors are linearly dependent"),
            Error::NotFibonacci(m) => write!(f, "{m} is not a Fibonacci number"),
            Error::OutsideDomain(msg) => write!(f, "outside domain: {msg}"),
            Error::AddressOutOfRange { address, word_bits } => {
                write!(f, "address {address} does not fit in {word_bits} bits")
            }
            Error::ValueOverflow { value, word_bits } => {
                write!(f, "value {value} does not fit in a {word_bits}-bit cell")
            }
            Error::NonMonotonicEpoch { current, requested } => write!(
                f,
                "epoch ids must strictly decrease: current {current}, requested {requested}"
            ),
            Error::MemoryFrozen => f.write_str("memory is frozen for the query phase"),
            Error::ConstructionFailure { k, witness } => write!(
                f,
                "query family construction stalled at suffix length {k} (witness {witness:?})"
            ),
            Error::UpdateBoundExceeded { op, probes, declared } => write!(
                f,
                "update {op} probed {probes} cells, declared worst case is {declared}"
            ),
            Error::QueryBoundExceeded { probes, declared } => {
                write!(f, "query probed {probes} cells, declared worst case is {declared}")
            }
            Error::WrongOperationKind(what) => write!(f, "operation kind not supported: {what}"),
            Error::NotFound(msg) => write!(f, "not found: {msg}"),
            Error::Integrity(msg) => write!(f, "integrity violation: {msg}"),
            Error::Malformed(msg) => write!(f, "malformed input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
