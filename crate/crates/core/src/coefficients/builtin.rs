//! Built-in coefficient systems.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::system::{AssumptionConstants, CoefficientSystem, KappaRule, OriginPolicy, VectorFields};
use crate::error::{FlowError, Result};

/// Default radius inside which the irregular example refuses Jacobians.
pub const DEFAULT_R_MIN: f64 = 1e-6;

/// Name + parameters of a built-in system, as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Builtin {
    #[serde(rename = "example21")]
    Example21(IrregularParams),
    OrnsteinUhlenbeck(OuParams),
    GeometricBm(GbmParams),
    Constant(ConstantParams),
    AdditiveNoise(AdditiveParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrregularParams {
    #[serde(default = "default_d2")]
    pub d: usize,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    #[serde(default = "default_d1")]
    pub d: usize,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmParams {
    #[serde(default = "default_d1")]
    pub d: usize,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_sigma_gbm")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantParams {
    #[serde(default = "default_d1")]
    pub d: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveParams {
    #[serde(default = "default_d1")]
    pub d: usize,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn default_d1() -> usize {
    1
}
fn default_d2() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn default_sigma_gbm() -> f64 {
    0.2
}
fn default_r_min() -> f64 {
    DEFAULT_R_MIN
}

impl Builtin {
    pub fn build(&self) -> Result<CoefficientSystem> {
        match self {
            Builtin::Example21(p) => example21(p),
            Builtin::OrnsteinUhlenbeck(p) => Ok(ornstein_uhlenbeck(p.d, p.theta, p.sigma)),
            Builtin::GeometricBm(p) => Ok(geometric_bm(p.d, p.mu, p.sigma)),
            Builtin::Constant(p) => Ok(constant(p.d, p.sigma, p.drift)),
            Builtin::AdditiveNoise(p) => Ok(additive_noise(p.d, p.sigma)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Example21(_) => "example21",
            Builtin::OrnsteinUhlenbeck(_) => "ornstein_uhlenbeck",
            Builtin::GeometricBm(_) => "geometric_bm",
            Builtin::Constant(_) => "constant",
            Builtin::AdditiveNoise(_) => "additive_noise",
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(FlowError::Constraint {
            constraint: "d >= 1".into(),
            detail: "0".into(),
        });
    }
    Ok(())
}

/// Constants for systems with constant diffusion `sigma` and drift Jacobian
/// bounded by `lip`.
fn smooth_constants(d: usize, sigma: f64, lip: f64, growth: f64) -> AssumptionConstants {
    let df = d as f64;
    AssumptionConstants {
        p1: 1.0,
        p2: 1.0,
        p3: 2.0 * (df + 1.0) + 2.0,
        p4: df + 2.0,
        p5: 1.0,
        c1: sigma * sigma,
        c2: growth + 1.0,
        c3: lip * df.sqrt() + 1.0,
        r1: 1.0,
        delta: 1.0,
        kappa: KappaRule::default(),
    }
}

// ---------------------------------------------------------------------------
// smooth partition of unity used by the irregular example

fn phi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let a = phi(t);
    let b = phi(1.0 - t);
    a / (a + b)
}

/// Bump equal to 1 on `|x| <= 2` and 0 on `|x| >= 3`.
pub fn bump_inner(r: f64) -> f64 {
    1.0 - smooth_step(r - 2.0)
}

/// Bump equal to 0 on `|x| <= 1` and 1 on `|x| >= 2`.
pub fn bump_outer(r: f64) -> f64 {
    smooth_step(r - 1.0)
}

/// The irregular example: non-Lipschitz at the origin, unbounded (or
/// degenerate) diffusion at infinity, with `m = d`.
#[derive(Debug, Clone)]
pub struct IrregularFields {
    d: usize,
    q1: f64,
    q2: f64,
    q3: f64,
    q4: f64,
}

impl IrregularFields {
    /// Scalar multiplier of `e_k` in `X_k`.
    fn diffusion_scale(&self, r: f64) -> f64 {
        let g1 = bump_inner(r);
        let g2 = bump_outer(r);
        let mut s = (1.0 + r.powf(self.q1)) * g1;
        if g2 > 0.0 {
            s += r.powf(self.q2) * g2;
        }
        s
    }

    /// Scalar multiplier of `x` in `X_0`; only called with `r > 0`.
    fn drift_scale(&self, r: f64) -> f64 {
        let g1 = bump_inner(r);
        let g2 = bump_outer(r);
        let mut s = 0.0;
        if g1 > 0.0 {
            s -= (1.0 + r.powf(-self.q3)) * g1;
        }
        if g2 > 0.0 {
            s -= r.powf(self.q4) * g2;
        }
        s
    }
}

impl VectorFields for IrregularFields {
    fn dim(&self) -> usize {
        self.d
    }

    fn noise_dim(&self) -> usize {
        self.d
    }

    fn values(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        let r = crate::linalg::norm(x);
        out.iter_mut().for_each(|v| *v = 0.0);
        if r > 0.0 {
            let c0 = self.drift_scale(r);
            for i in 0..d {
                out[i] = c0 * x[i];
            }
        }
        let s = self.diffusion_scale(r);
        for k in 1..=d {
            out[k * d + (k - 1)] = s;
        }
    }

    fn jacobians(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.d;
        let dd = d * d;
        let r = crate::linalg::norm(x);
        if r == 0.0 || (r > 1.0 && r <= 3.0) {
            return false;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let (diag, outer, diff_coef) = if r <= 1.0 {
            (
                -(1.0 + r.powf(-self.q3)),
                self.q3 * r.powf(-self.q3 - 2.0),
                self.q1 * r.powf(self.q1 - 2.0),
            )
        } else {
            (
                -r.powf(self.q4),
                -self.q4 * r.powf(self.q4 - 2.0),
                self.q2 * r.powf(self.q2 - 2.0),
            )
        };
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = outer * x[i] * x[j] + if i == j { diag } else { 0.0 };
            }
        }
        for k in 1..=d {
            let row = k * dd + (k - 1) * d;
            for j in 0..d {
                out[row + j] = diff_coef * x[j];
            }
        }
        true
    }
}

/// Validates the example's parameter window and builds it.
pub fn example21(p: &IrregularParams) -> Result<CoefficientSystem> {
    check_dim(p.d)?;
    let d = p.d as f64;
    let fail = |c: &str, detail: String| FlowError::Constraint {
        constraint: c.to_string(),
        detail,
    };
    if !(p.q1 > 0.0 && p.q3 > 0.0 && p.q4 > 0.0) {
        return Err(fail(
            "q1, q3, q4 > 0",
            format!("q1={}, q3={}, q4={}", p.q1, p.q3, p.q4),
        ));
    }
    let q1_lo = 1.0 - d / (2.0 * (d + 1.0));
    if !(p.q1 > q1_lo) {
        return Err(fail("q1 > 1 - d/(2(d+1))", format!("q1={} <= {q1_lo}", p.q1)));
    }
    if !(p.q1 < 1.0) {
        return Err(fail("q1 < 1", format!("q1={}", p.q1)));
    }
    if !(p.q3 > 2.0 * (1.0 - p.q1)) {
        return Err(fail(
            "q3 > 2(1-q1)",
            format!("q3={} <= {}", p.q3, 2.0 * (1.0 - p.q1)),
        ));
    }
    let q3_hi = d / (d + 1.0);
    if !(p.q3 < q3_hi) {
        return Err(fail("q3 < d/(d+1)", format!("q3={} >= {q3_hi}", p.q3)));
    }
    if !(p.q4 + 2.0 > 2.0 * p.q2) {
        return Err(fail(
            "q4 + 2 > 2 q2",
            format!("q4 + 2 = {} <= 2 q2 = {}", p.q4 + 2.0, 2.0 * p.q2),
        ));
    }
    if !(p.r_min > 0.0) {
        return Err(fail("r_min > 0", format!("{}", p.r_min)));
    }
    let fields = IrregularFields {
        d: p.d,
        q1: p.q1,
        q2: p.q2,
        q3: p.q3,
        q4: p.q4,
    };
    let constants = AssumptionConstants {
        p1: if p.q2 < 0.0 { -2.0 * p.q2 } else { 1.0 },
        p2: (p.q4 + 1.0).max(p.q2).max(1.0),
        p3: 0.5 * (2.0 * (d + 1.0) + d / (1.0 - p.q1)),
        p4: 0.5 * ((d + 1.0) + d / p.q3),
        p5: p.q4.max(p.q2 - 1.0),
        c1: 9f64.powf(p.q2.min(0.0)),
        c2: 3.0,
        c3: d.sqrt() + p.q4 + p.q2.abs() + 1.0,
        r1: 3.0,
        delta: 1.0,
        kappa: KappaRule::default(),
    };
    Ok(CoefficientSystem::new(
        "example21",
        Arc::new(fields),
        constants,
        OriginPolicy::SingularJacobian { r_min: p.r_min },
    ))
}

/// `dx = -theta x dt + sigma dW` with `m = d`.
#[derive(Debug, Clone)]
struct LinearFields {
    d: usize,
    /// drift `a x + b 1`
    a: f64,
    b: f64,
    /// diffusion `X_k = (c + s x_k) e_k`
    c: f64,
    s: f64,
}

impl VectorFields for LinearFields {
    fn dim(&self) -> usize {
        self.d
    }

    fn noise_dim(&self) -> usize {
        self.d
    }

    fn values(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            out[i] = self.a * x[i] + self.b;
        }
        for k in 1..=d {
            out[k * d + (k - 1)] = self.c + self.s * x[k - 1];
        }
    }

    fn jacobians(&self, _x: &[f64], out: &mut [f64]) -> bool {
        let d = self.d;
        let dd = d * d;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            out[i * d + i] = self.a;
        }
        for k in 1..=d {
            out[k * dd + (k - 1) * d + (k - 1)] = self.s;
        }
        true
    }
}

fn linear(label: &str, d: usize, a: f64, b: f64, c: f64, s: f64) -> CoefficientSystem {
    let constants = smooth_constants(d, c, a.abs().max(s.abs()), a.abs().max(b.abs()).max(c.abs()).max(s.abs()));
    CoefficientSystem::new(
        label,
        Arc::new(LinearFields { d, a, b, c, s }),
        constants,
        OriginPolicy::Regular,
    )
}

pub fn ornstein_uhlenbeck(d: usize, theta: f64, sigma: f64) -> CoefficientSystem {
    linear("ornstein_uhlenbeck", d.max(1), -theta, 0.0, sigma, 0.0)
}

/// Componentwise geometric Brownian motion `dx_i = mu x_i dt + sigma x_i dW^i`.
pub fn geometric_bm(d: usize, mu: f64, sigma: f64) -> CoefficientSystem {
    linear("geometric_bm", d.max(1), mu, 0.0, 0.0, sigma)
}

/// Constant fields: `X_0 = drift * (1, ..., 1)`, `X_k = sigma e_k`.
pub fn constant(d: usize, sigma: f64, drift: f64) -> CoefficientSystem {
    linear("constant", d.max(1), 0.0, drift, sigma, 0.0)
}

pub fn additive_noise(d: usize, sigma: f64) -> CoefficientSystem {
    linear("additive_noise", d.max(1), 0.0, 0.0, sigma, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q3: f64) -> IrregularParams {
        IrregularParams {
            d: 2,
            q1: 0.8,
            q2: 0.5,
            q3,
            q4: 1.0,
            r_min: DEFAULT_R_MIN,
        }
    }

    #[test]
    fn example21_accepts_valid_window() {
        assert!(example21(&params(0.5)).is_ok());
    }

    #[test]
    fn example21_rejects_q3_above_ceiling() {
        let err = example21(&params(0.7)).unwrap_err();
        assert!(err.to_string().contains("q3 < d/(d+1)"), "{err}");
    }

    #[test]
    fn example21_rejects_q3_below_floor() {
        let err = example21(&params(0.3)).unwrap_err();
        assert!(err.to_string().contains("q3 > 2(1-q1)"), "{err}");
    }

    #[test]
    fn example21_values_at_origin() {
        let sys = example21(&params(0.5)).unwrap();
        let mut v = vec![0.0; sys.values_len()];
        sys.values_into(&[0.0, 0.0], &mut v).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn bumps_match_region_table() {
        for r in [0.0, 0.5, 1.0, 2.0] {
            assert_eq!(bump_inner(r), 1.0);
        }
        for r in [3.0, 4.0, 10.0] {
            assert_eq!(bump_inner(r), 0.0);
        }
        for r in [0.0, 0.5, 1.0] {
            assert_eq!(bump_outer(r), 0.0);
        }
        for r in [2.0, 3.0, 7.0] {
            assert_eq!(bump_outer(r), 1.0);
        }
        let mid = bump_inner(2.5);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn ou_definition() {
        let sys = ornstein_uhlenbeck(1, 1.0, 1.0);
        assert_eq!(sys.value(0, &[2.0]).unwrap(), vec![-2.0]);
        assert_eq!(sys.value(1, &[2.0]).unwrap(), vec![1.0]);
    }
}
