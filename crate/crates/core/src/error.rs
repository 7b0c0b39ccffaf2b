use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("negative release weight {0}")]
    NegativeRelease(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error(
        "no interior invasion threshold: d_M b_W / (d_W b_M) = {ratio} is outside [1 - s_h, 1)"
    )]
    NoThreshold { ratio: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator exceeded {steps} steps at t = {t}")]
    TooManySteps { t: f64, steps: usize },

    #[error("state component `{component}` = {value} went negative at t = {t}")]
    NegativeState {
        component: &'static str,
        value: f64,
        t: f64,
    },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("proportion after release {index} is within {tol} of the invasion threshold")]
    ThresholdDegenerate { index: usize, tol: f64 },

    #[error(
        "finite-difference step {h} collides with neighbouring release times at index {index}"
    )]
    StepCollision { index: usize, h: f64 },

    #[error("endemic equilibrium inconsistency: {0}")]
    Inconsistent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors raised by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::TooManySteps { .. }
                | Error::NegativeState { .. }
                | Error::NonFinite { .. }
                | Error::ThresholdDegenerate { .. }
                | Error::Inconsistent(_)
        )
    }
}
