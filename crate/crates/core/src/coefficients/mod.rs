//! Coefficient systems `X_0, ..., X_m`: values, Jacobians, the diffusion
//! matrix and its right inverse, the `K_p` functional, `Theta_g`, built-in
//! examples and a sampled assumption checker.

pub mod builtin;
pub mod check;
pub mod spectral;
pub mod system;
pub mod theta;

pub use builtin::Builtin;
pub use check::{check_assumptions, AssumptionReport, CheckSpec, ConditionReport, Verdict};
pub use spectral::{
    diffusion_map_apply, diffusion_matrix, kp_max, right_inverse_apply, RightInverse, SpectralReport,
    DEFAULT_CONDITION_LIMIT,
};
pub use system::{
    AssumptionConstants, CoefficientSystem, JacobianSource, KappaRule, OriginPolicy, VectorFields,
    DEFAULT_FD_STEP,
};
pub use theta::{theta_g, TailCertificate, ThetaBound, ThetaSearch};
