use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A NaN or infinity showed up where a finite vector was expected.
    #[error("non-finite value in {what} ({location})")]
    NonFinite { what: &'static str, location: String },

    #[error("singular or ill-conditioned matrix in {what} (condition estimate {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    Divergence { iterations: usize, last_update: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("manifold recursion at order {level}: {source}")]
    Recursion {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage, step {step} (t = {time}): {source}")]
    Stage {
        stage: &'static str,
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn non_finite(what: &'static str, location: impl Into<String>) -> Self {
        Error::NonFinite {
            what,
            location: location.into(),
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::Recursion {
            level,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, stage: &'static str, step: usize, time: f64) -> Self {
        Error::Stage {
            stage,
            step,
            time,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical breakdown (non-finite state,
    /// singular solve, divergent iteration) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::Singular { .. } | Error::Divergence { .. } => true,
            Error::InvalidConfig(_) | Error::Dimension(_) => false,
            Error::Recursion { source, .. } | Error::Stage { source, .. } => source.is_numerical(),
        }
    }

    /// True when the root cause is a NaN/inf state.
    pub fn is_non_finite(&self) -> bool {
        match self {
            Error::NonFinite { .. } => true,
            Error::Recursion { source, .. } | Error::Stage { source, .. } => source.is_non_finite(),
            _ => false,
        }
    }
}
