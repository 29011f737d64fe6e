use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("statevector of dimension {dim} exceeds the cap of {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("imaginary residue {0:e} exceeds tolerance")]
    ImaginaryResidue(f64),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("missing constant {0}")]
    MissingConstant(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
