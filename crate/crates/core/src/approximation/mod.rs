//! Truncation and mollification of irregular coefficients.

pub mod family;
pub mod lp;
pub mod mollifier;
pub mod truncation;

pub use family::{family_member, select_lambda0, MollifiedFamily, MollifiedFields};
pub use lp::{lp_distance, lp_distance_with, LpDistance, LpMode, LpQuadrature};
pub use mollifier::{mollify_value, normalisation_constant, MollifiedValue, Mollifier};
pub use truncation::{radial_tangential_derivative_check, truncate, DerivativeCheck, TruncatedSystem};
pub use crate::quadrature::BallResolution;
