use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested quantity is not defined (or not finite) in this parameter regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// `∫ r^d p_1(r) dr` diverges for this kernel.
    #[error("divergent moment: the first absolute moment of the kernel is infinite ({0})")]
    DivergentMoment(String),

    /// The shape variant has no evaluation path for this operation.
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature did not converge in {context}: estimate {estimate:e}, residual {residual:e}")]
    NonConvergence {
        context: String,
        estimate: f64,
        residual: f64,
    },

    /// The Fourier route produced a density value far below zero.
    #[error("negative density {value:e} at r = {r}")]
    NegativeDensity { r: f64, value: f64 },

    /// Serializing a report failed.
    #[error("output error: {0}")]
    Output(String),

    /// Rejection sampling from the bounding box accepts too rarely.
    #[error("rejection sampling efficiency {efficiency:e} is below 1e-3")]
    Inefficient { efficiency: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }

    /// True when the quantity is undefined in the requested parameter regime.
    pub fn is_regime(&self) -> bool {
        matches!(self, Error::Regime(_) | Error::DivergentMoment(_))
    }

    /// True for errors caused by invalid inputs or regimes rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Regime(_) | Error::DivergentMoment(_) | Error::UnsupportedShape(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
