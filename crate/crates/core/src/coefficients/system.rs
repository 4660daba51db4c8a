use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::linalg::norm;

/// Default central-difference step for Jacobians without a closed form.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Raw vector fields `X_0, ..., X_m` on `R^d`.
///
/// Layouts are flat and row-major:
/// * values: `out[k * d + i] = X_{k,i}(x)`
/// * jacobians: `out[k * d * d + i * d + j] = d X_{k,i} / d x_j`
pub trait VectorFields: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn values(&self, x: &[f64], out: &mut [f64]);

    /// Writes closed-form Jacobians and returns `true`, or returns `false`
    /// when no closed form is available at `x` (finite differences are used).
    fn jacobians(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// How a Jacobian was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianSource {
    Analytic,
    FiniteDifference,
}

/// Rule for points where the Jacobians blow up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginPolicy {
    /// Everything is finite everywhere.
    Regular,
    /// Values are defined at the origin but Jacobians are refused for `|x| < r_min`.
    SingularJacobian { r_min: f64 },
}

impl OriginPolicy {
    pub fn r_min(&self) -> Option<f64> {
        match self {
            OriginPolicy::Regular => None,
            OriginPolicy::SingularJacobian { r_min } => Some(*r_min),
        }
    }
}

/// Exponential-integrability budget `kappa(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum KappaRule {
    /// `kappa(p) = scale / p`
    Reciprocal { scale: f64 },
    Constant { value: f64 },
}

impl KappaRule {
    pub fn kappa(&self, p: f64) -> f64 {
        match *self {
            KappaRule::Reciprocal { scale } => scale / p,
            KappaRule::Constant { value } => value,
        }
    }
}

impl Default for KappaRule {
    fn default() -> Self {
        KappaRule::Reciprocal { scale: 1.0 }
    }
}

/// Growth and ellipticity constants attached to a coefficient system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p5: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub r1: f64,
    pub delta: f64,
    pub kappa: KappaRule,
}

impl AssumptionConstants {
    pub fn kappa(&self, p: f64) -> f64 {
        self.kappa.kappa(p)
    }

    /// Hoelder exponent of the Sobolev embedding, `1 - d / p3`.
    pub fn iota(&self, d: usize) -> f64 {
        1.0 - d as f64 / self.p3
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let d = d as f64;
        let positive = [
            ("p1 > 0", self.p1),
            ("p2 > 0", self.p2),
            ("p5 > 0", self.p5),
            ("C1 > 0", self.c1),
            ("C2 > 0", self.c2),
            ("C3 > 0", self.c3),
            ("R1 > 0", self.r1),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(constraint(name, v));
            }
        }
        if !(self.p3 > 2.0 * (d + 1.0)) {
            return Err(constraint("p3 > 2(d+1)", self.p3));
        }
        if !(self.p4 > d + 1.0) {
            return Err(constraint("p4 > d+1", self.p4));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(constraint("0 < delta <= 1", self.delta));
        }
        for p in [1.5, 2.0, 4.0] {
            if !(self.kappa(p) > 0.0) {
                return Err(constraint("kappa(p) > 0", self.kappa(p)));
            }
        }
        Ok(())
    }
}

fn constraint(name: &str, v: f64) -> FlowError {
    FlowError::Constraint {
        constraint: name.to_string(),
        detail: format!("{v}"),
    }
}

/// A coefficient system `X_0, ..., X_m` together with its constants and
/// singular-set policy. Cheap to clone.
#[derive(Clone)]
pub struct CoefficientSystem {
    label: String,
    fields: Arc<dyn VectorFields>,
    constants: AssumptionConstants,
    origin: OriginPolicy,
    fd_step: f64,
}

impl fmt::Debug for CoefficientSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSystem")
            .field("label", &self.label)
            .field("d", &self.dim())
            .field("m", &self.noise_dim())
            .field("origin", &self.origin)
            .finish()
    }
}

impl CoefficientSystem {
    pub fn new(
        label: impl Into<String>,
        fields: Arc<dyn VectorFields>,
        constants: AssumptionConstants,
        origin: OriginPolicy,
    ) -> Self {
        Self {
            label: label.into(),
            fields,
            constants,
            origin,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_constants(mut self, constants: AssumptionConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.fields.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.fields.noise_dim()
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    pub fn origin_policy(&self) -> OriginPolicy {
        self.origin
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn fields(&self) -> &Arc<dyn VectorFields> {
        &self.fields
    }

    /// Length of the flat value buffer, `(m + 1) * d`.
    pub fn values_len(&self) -> usize {
        (self.noise_dim() + 1) * self.dim()
    }

    /// Length of the flat Jacobian buffer, `(m + 1) * d * d`.
    pub fn jacobians_len(&self) -> usize {
        (self.noise_dim() + 1) * self.dim() * self.dim()
    }

    pub fn is_singular_at(&self, x: &[f64]) -> bool {
        match self.origin.r_min() {
            Some(r) => norm(x) < r,
            None => false,
        }
    }

    /// All field values at `x`; errors if any entry is NaN or infinite.
    pub fn values_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.fields.values(x, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FlowError::NonFinite { point: x.to_vec() })
        }
    }

    pub fn value(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![0.0; self.values_len()];
        self.values_into(x, &mut out)?;
        Ok(out[k * d..(k + 1) * d].to_vec())
    }

    /// All Jacobians at `x`, analytic where the fields provide them.
    pub fn jacobians_into(&self, x: &[f64], out: &mut [f64]) -> Result<JacobianSource> {
        if let Some(r_min) = self.origin.r_min() {
            if norm(x) < r_min {
                return Err(FlowError::SingularPoint {
                    point: x.to_vec(),
                    r_min,
                });
            }
        }
        let source = if self.fields.jacobians(x, out) {
            JacobianSource::Analytic
        } else {
            self.fd_jacobians_into(x, out)?;
            JacobianSource::FiniteDifference
        };
        if out.iter().all(|v| v.is_finite()) {
            Ok(source)
        } else {
            Err(FlowError::NonFinite { point: x.to_vec() })
        }
    }

    /// Central finite differences of the values at step `fd_step`, regardless
    /// of whether a closed form exists.
    pub fn fd_jacobians_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        fd_jacobians(self, x, self.fd_step, out)
    }

    pub fn jacobian(&self, k: usize, x: &[f64]) -> Result<(Vec<f64>, JacobianSource)> {
        let dd = self.dim() * self.dim();
        let mut out = vec![0.0; self.jacobians_len()];
        let src = self.jacobians_into(x, &mut out)?;
        Ok((out[k * dd..(k + 1) * dd].to_vec(), src))
    }

    /// Point used for Jacobian evaluation when `x` sits inside the singular
    /// radius: `r_min * x / |x|`, or `r_min * e_1` at the origin.
    pub fn clamp_to_regular(&self, x: &[f64]) -> Option<Vec<f64>> {
        let r_min = self.origin.r_min()?;
        let r = norm(x);
        if r >= r_min {
            return None;
        }
        if r == 0.0 {
            let mut e = vec![0.0; x.len()];
            e[0] = r_min;
            Some(e)
        } else {
            Some(x.iter().map(|v| v * r_min / r).collect())
        }
    }
}

/// Central-difference Jacobians of `sys` at step `h`.
pub fn fd_jacobians(sys: &CoefficientSystem, x: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
    let d = sys.dim();
    let n = sys.noise_dim() + 1;
    let mut plus = vec![0.0; n * d];
    let mut minus = vec![0.0; n * d];
    let mut probe = x.to_vec();
    for j in 0..d {
        probe[j] = x[j] + h;
        sys.values_into(&probe, &mut plus)?;
        probe[j] = x[j] - h;
        sys.values_into(&probe, &mut minus)?;
        probe[j] = x[j];
        for k in 0..n {
            for i in 0..d {
                out[k * d * d + i * d + j] = (plus[k * d + i] - minus[k * d + i]) / (2.0 * h);
            }
        }
    }
    Ok(())
}
