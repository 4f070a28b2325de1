use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown Pauli character {ch:?} in label {label:?}")]
    UnknownCharacter { ch: char, label: String },

    #[error("site index {site} out of range 1..={n_qubits}")]
    SiteOutOfRange { site: usize, n_qubits: usize },

    #[error("site {site} assigned more than once in label {label:?}")]
    DuplicateSite { site: usize, label: String },

    #[error("malformed Pauli label {label:?}: {reason}")]
    MalformedLabel { label: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tolerance must be nonnegative and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("operator is not Hermitian: {0}")]
    NonHermitian(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("backend {backend} cannot evaluate a {state} initial state")]
    IncompatibleBackend { backend: String, state: String },

    #[error("{what} cap of {cap} exceeded")]
    CapExceeded { what: &'static str, cap: usize },

    #[error("identity operator missing from the first basis slot")]
    MissingIdentity,

    #[error("all singular values truncated (largest {sigma_max:e})")]
    SingularSystem { sigma_max: f64 },

    #[error("dense simulation limited to {limit} qubits, got {n_qubits}")]
    TooLarge { n_qubits: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error("insufficient zero crossings: {found} found, {required} required")]
    InsufficientCrossings { found: usize, required: usize },
}

impl Error {
    /// Pipeline stage that produced the error, if labelled.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            Error::Stage { .. } => e,
            other => Error::Stage { stage, source: Box::new(other) },
        })
    }
}
