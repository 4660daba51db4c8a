//! Simulation of stochastic flows for SDEs with irregular coefficients.
//!
//! The crate is organised bottom-up:
//!
//! * [`coefficients`] – vector fields, Jacobians, `K_p`, `Theta_g`, built-ins
//!   and a sampled assumption checker;
//! * [`approximation`] – spherical truncation, mollification on the ball and
//!   the smooth `eps`-family of coefficient systems;
//! * [`engine`] – reproducible Brownian increments and Euler–Maruyama for
//!   the coupled state/derivative system;
//! * [`estimators`] – Monte Carlo functionals (moments, Bismut–Elworthy–Li
//!   gradients, convergence tables, integration-by-parts and Krylov-type
//!   diagnostics).

pub mod approximation;
pub mod coefficients;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod linalg;
pub mod quadrature;

pub use coefficients::{AssumptionConstants, Builtin, CoefficientSystem};
pub use engine::{BrownianPath, IntegratorConfig, Trajectory};
pub use error::{FlowError, Result};
pub use estimators::{EstimateReport, McConfig};
