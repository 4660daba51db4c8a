//! Reproducible Brownian increments and the Euler–Maruyama engine.

pub mod integrate;
pub mod rng;

pub use integrate::{
    integrate, integrate_with, log_exponential_check, multi_start, Coupling, ExponentialCheck, IntegratorConfig,
    PathOutcome, Scheme, StepState, Trajectory, Workspace,
};
pub use rng::{fill_increments, normal_quantile, sample_path, BrownianPath, Provenance};
