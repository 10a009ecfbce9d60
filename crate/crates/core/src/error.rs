use alloc::string::String;

pub type Result<T> = core::result::Result<T, CdeError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CdeError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("density has no positive mass")]
    ZeroMass,
    #[error("density is not normalized (integral {0})")]
    NotNormalized(f64),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("too few observations: need {need}, have {have}")]
    TooFewObservations { need: usize, have: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: alloc::boxed::Box<CdeError>,
    },
}

impl CdeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CdeError::InvalidArgument(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        CdeError::Invariant(msg.into())
    }
}
