use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// `f(x) == 0` with no label to fall back on: the sign is undefined.
    #[error("degenerate record: f(x) is zero and no label was given")]
    DegenerateRecord,

    #[error("gradient is zero; FGM direction is undefined")]
    ZeroGradient,

    #[error("PGD needs a model and the record's input point")]
    ModelRequired,

    #[error("instance too large for exact enumeration: n = {n} exceeds max_n = {max_n}")]
    TooLarge { n: usize, max_n: usize },

    #[error("point violates the local linearity assumption: {0}")]
    ModelAssumptionViolated(String),

    #[error("rejection sampling failed: accepted {accepted} of {draws} draws")]
    DistributionMismatch { accepted: usize, draws: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Errors that mean "this tool cannot do that" rather than "bad input".
    pub fn is_capability(&self) -> bool {
        matches!(
            self,
            Error::ModelRequired | Error::TooLarge { .. } | Error::Unsupported(_)
        )
    }
}
