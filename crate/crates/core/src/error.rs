use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("finite-difference Jacobian is singular")]
    SingularJacobian,

    #[error("non-finite ELBO gradient at optimizer step {step}")]
    OptimizerDiverged { step: usize },

    #[error("non-finite gradient at leapfrog step {step}")]
    LeapfrogDiverged { step: usize },

    /// A map produced a NaN or infinity; `stage` names where.
    #[error("non-finite value during {stage}")]
    NonFinite { stage: &'static str },

    #[error("target density is zero at the evaluated state")]
    ZeroDensity,

    #[error("grid covers {covered:.6} of the target mass, need at least {required}")]
    Coverage { covered: f64, required: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by floating-point divergence rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::OptimizerDiverged { .. }
                | Error::LeapfrogDiverged { .. }
                | Error::NonFinite { .. }
                | Error::ZeroDensity
                | Error::SingularJacobian
        )
    }
}
