use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n = {n} exceeds the configured cap of {cap} for {what}")]
    CapExceeded { n: u64, cap: u64, what: &'static str },

    #[error("trend detection inconclusive: {0}")]
    Inconclusive(String),

    #[error("unsupported (regime, scaling family) combination: {0}")]
    UnsupportedCombination(String),

    #[error("eps = {eps} outside the admissible range {range}")]
    EpsOutOfRange { eps: f64, range: String },

    #[error("relation requires a different regime: {0}")]
    RegimeMismatch(String),

    #[error("splitting level {level} (margin <= {margin}) was never reached")]
    DegenerateLevels { level: usize, margin: i64 },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for refusals that stem from the model rather than from bad input.
    pub fn is_model_refusal(&self) -> bool {
        matches!(
            self,
            Error::Inconclusive(_)
                | Error::UnsupportedCombination(_)
                | Error::EpsOutOfRange { .. }
                | Error::RegimeMismatch(_)
                | Error::DegenerateLevels { .. }
        )
    }
}
