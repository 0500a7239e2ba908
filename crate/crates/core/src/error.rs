use thiserror::Error;

use crate::series::SeriesError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Series(#[from] SeriesError),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("polar transversality failure: angular velocity vanishes at theta={theta}, r={r}")]
    PolarTransversality { theta: f64, r: f64 },

    #[error("evaluation failed in sector {sector} at theta={theta}, r={r}: {reason}")]
    Evaluation {
        sector: usize,
        theta: f64,
        r: f64,
        reason: String,
    },

    #[error("rho={rho} outside the domain ({min}, {max})")]
    OutsideDomain { rho: f64, min: f64, max: f64 },

    #[error("stiff or singular cascade: step size underflow at t={t} (sector {sector})")]
    StepUnderflow { t: f64, sector: usize },

    #[error("non-finite state at t={t} (sector {sector})")]
    NonFinite { t: f64, sector: usize },

    #[error("crossing violated at theta={theta}, point=({x}, {y})")]
    CrossingViolated { theta: f64, x: f64, y: f64 },

    #[error("orbit did not return to the section within t={t_cap}")]
    NoReturn { t_cap: f64 },

    #[error("no cycle found at eps={eps}: {reason}")]
    NoCycle { eps: f64, reason: String },

    #[error("ill-conditioned fit (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("expression parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::OrderTooLarge { .. }
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::OutsideDomain { .. }
        )
    }
}
