use thiserror::Error;

use crate::validate::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("model violates solver assumptions:\n{0}")]
    Assumption(ValidationReport),

    #[error("model is not a Markov chain (state {state} has {actions} actions)")]
    NotAChain { state: usize, actions: usize },

    #[error("model has non-uniform costs; use the value-iteration engine")]
    NonUniformCost,

    #[error("invalid threshold {0}: thresholds must lie strictly between 0 and 1")]
    Threshold(String),

    #[error("policy is improper: goal unreachable from state {state}")]
    ImproperPolicy { state: usize },

    #[error("{censored} of {samples} simulated runs exceeded the horizon {horizon}; the policy is likely improper")]
    Censored { censored: u64, samples: u64, horizon: u64 },

    #[error("policy does not match model: {0}")]
    PolicyMismatch(String),

    #[error("{what} exceeded its safety cap of {cap}; the model likely violates the solver assumptions")]
    CapExceeded { what: &'static str, cap: u64 },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("invalid linear program: {0}")]
    Lp(String),

    #[error("invalid argument: {0}")]
    Argument(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
