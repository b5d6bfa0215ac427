use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("kernel {dim} needs a value for parent dimension {parent}")]
    MissingParent { dim: usize, parent: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("bin index {index} out of range for {len} bins")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("probability mass defect: {0}")]
    MassDefect(String),

    #[error("{what} needs {required:.3e} entries, cap is {cap}")]
    ResourceCap { what: String, required: f64, cap: usize },

    #[error("inconsistent elimination ordering: {0}")]
    Ordering(String),

    #[error("state outside the safe set: {0}")]
    OutsideSafeSet(String),

    #[error("power iteration did not settle after {0} iterations")]
    PowerIteration(usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Resource-cap failures are reported with a distinct exit status by the CLI.
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, Error::ResourceCap { .. })
    }
}
