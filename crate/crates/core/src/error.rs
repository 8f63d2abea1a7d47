use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The condition estimate `‖A‖₁‖A⁻¹‖₁` exceeded the gate.
    #[error("ill-conditioned element: condition estimate {estimate:e} exceeds {threshold:e}")]
    IllConditioned { estimate: f64, threshold: f64 },

    #[error("overflow while computing {0}")]
    Overflow(&'static str),

    #[error("trajectory left the domain at t = {t}")]
    LeftDomain { t: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("sampling margin {delta} is not admissible for this domain")]
    BadMargin { delta: f64 },

    #[error("no backward flow: {0}")]
    NoBackwardFlow(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("model has no generator")]
    NoGenerator,

    #[error("flow has no fixed point")]
    NoFixedPoint,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
