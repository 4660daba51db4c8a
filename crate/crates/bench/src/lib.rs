//! Shared fixtures for the criterion benchmarks.

use flowlab::coefficients::builtin::{self, IrregularParams};
use flowlab::{CoefficientSystem, IntegratorConfig};

pub fn example21() -> CoefficientSystem {
    builtin::example21(&IrregularParams {
        d: 2,
        q1: 0.8,
        q2: 0.5,
        q3: 0.5,
        q4: 1.0,
        r_min: 1e-6,
    })
    .expect("valid parameters")
}

pub fn ou() -> CoefficientSystem {
    builtin::ornstein_uhlenbeck(1, 1.0, 1.0)
}

pub fn short_horizon() -> IntegratorConfig {
    IntegratorConfig::new(1e-3, 0.1)
}
