use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("Jacobian requested at {point:?}, inside the singular radius {r_min}")]
    SingularPoint { point: Vec<f64>, r_min: f64 },

    #[error("non-finite coefficient value at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("diffusion matrix near-singular at {point:?}: smallest eigenvalue {min_eigenvalue:e}, condition {condition:e}")]
    NearSingularDiffusion {
        point: Vec<f64>,
        min_eigenvalue: f64,
        condition: f64,
    },

    #[error("parameter constraint violated: {constraint} (got {detail})")]
    Constraint { constraint: String, detail: String },

    #[error("truncation radius {radius} is below R1 + 1 = {min}")]
    RadiusTooSmall { radius: f64, min: f64 },

    #[error("epsilon {eps} outside the admissible range (0, {eps0})")]
    EpsOutOfRange { eps: f64, eps0: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("integration failed at step {step}, x = {point:?}: {reason}")]
    Integration {
        step: usize,
        point: Vec<f64>,
        reason: String,
    },

    #[error("zero derivative state at step {step}")]
    ZeroDerivative { step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, FlowError>;
