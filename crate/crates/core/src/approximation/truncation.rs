//! Spherical truncation: fields are frozen along rays outside radius `R`.

use std::sync::Arc;

use super::super::coefficients::{CoefficientSystem, VectorFields};
use crate::error::{FlowError, Result};
use crate::linalg::{dot, norm};

/// `X~_{k,R}(x) = X_k(x)` for `|x| <= R`, `X_k(R x / |x|)` otherwise.
#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    base: CoefficientSystem,
    radius: f64,
}

#[derive(Debug)]
struct TruncatedFields {
    base: CoefficientSystem,
    radius: f64,
}

/// Radial projection onto the closed ball of radius `r`.
pub fn project_to_ball(x: &[f64], r: f64, out: &mut [f64]) {
    let n = norm(x);
    if n <= r {
        out.copy_from_slice(x);
    } else {
        let s = r / n;
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * s;
        }
    }
}

impl VectorFields for TruncatedFields {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn noise_dim(&self) -> usize {
        self.base.noise_dim()
    }

    fn values(&self, x: &[f64], out: &mut [f64]) {
        let mut y = vec![0.0; x.len()];
        project_to_ball(x, self.radius, &mut y);
        self.base.fields().values(&y, out);
    }

    fn jacobians(&self, x: &[f64], out: &mut [f64]) -> bool {
        // Outside the ball (and on the kink) the system falls back to finite
        // differences of the truncated values.
        if norm(x) < self.radius {
            self.base.jacobians_into(x, out).is_ok()
        } else {
            false
        }
    }
}

impl TruncatedSystem {
    pub fn base(&self) -> &CoefficientSystem {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// The truncated fields as a coefficient system in their own right.
    pub fn system(&self) -> CoefficientSystem {
        CoefficientSystem::new(
            format!("truncated({}, R={})", self.base.label(), self.radius),
            Arc::new(TruncatedFields {
                base: self.base.clone(),
                radius: self.radius,
            }),
            *self.base.constants(),
            self.base.origin_policy(),
        )
        .with_fd_step(self.base.fd_step())
    }

    pub fn values_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut y = vec![0.0; x.len()];
        project_to_ball(x, self.radius, &mut y);
        self.base.values_into(&y, out)
    }
}

/// Truncates `base` at radius `r`; requires `r >= R1 + 1`.
pub fn truncate(base: &CoefficientSystem, r: f64) -> Result<TruncatedSystem> {
    let min = base.constants().r1 + 1.0;
    if !(r >= min) {
        return Err(FlowError::RadiusTooSmall { radius: r, min });
    }
    Ok(TruncatedSystem {
        base: base.clone(),
        radius: r,
    })
}

/// Orthonormal basis of the tangent space `x^perp`.
pub fn tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let n = norm(x);
    let nu: Vec<f64> = x.iter().map(|v| v / n).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d.saturating_sub(1));
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let c = dot(&e, &nu);
        for (ej, nj) in e.iter_mut().zip(&nu) {
            *ej -= c * nj;
        }
        for b in &basis {
            let c = dot(&e, b);
            for (ej, bj) in e.iter_mut().zip(b) {
                *ej -= c * bj;
            }
        }
        let len = norm(&e);
        if len > 1e-8 {
            basis.push(e.iter().map(|v| v / len).collect());
        }
        if basis.len() + 1 == d {
            break;
        }
    }
    basis
}

#[derive(Debug, Clone, Copy)]
pub struct DerivativeCheck {
    /// Norm of the finite-difference derivative along `x / |x|`, max over fields.
    pub radial_norm: f64,
    /// Max over fields and tangent directions of the mismatch with
    /// `(R / |x|) DX_k(pi_R(x))(xi)`.
    pub tangential_error: f64,
}

/// Compares finite-difference derivatives of the truncated fields outside
/// the ball with the ray-frozen structure: zero radially, rescaled base
/// Jacobian tangentially.
pub fn radial_tangential_derivative_check(ts: &TruncatedSystem, x: &[f64], h: f64) -> Result<DerivativeCheck> {
    let base = ts.base();
    let (d, m) = (base.dim(), base.noise_dim());
    let r = norm(x);
    if !(r > ts.radius + 10.0 * h) {
        return Err(FlowError::InvalidArgument(format!(
            "|x| = {r} must exceed R + 10h = {}",
            ts.radius + 10.0 * h
        )));
    }
    let n = (m + 1) * d;
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut probe = vec![0.0; d];
    let mut directional = |u: &[f64], out: &mut Vec<f64>| -> Result<()> {
        for i in 0..d {
            probe[i] = x[i] + h * u[i];
        }
        ts.values_into(&probe, &mut plus)?;
        for i in 0..d {
            probe[i] = x[i] - h * u[i];
        }
        ts.values_into(&probe, &mut minus)?;
        out.clear();
        out.extend(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)));
        Ok(())
    };

    let nu: Vec<f64> = x.iter().map(|v| v / r).collect();
    let mut deriv = Vec::with_capacity(n);
    directional(&nu, &mut deriv)?;
    let radial_norm = (0..=m)
        .map(|k| norm(&deriv[k * d..(k + 1) * d]))
        .fold(0.0, f64::max);

    let mut projected = vec![0.0; d];
    project_to_ball(x, ts.radius, &mut projected);
    let mut jac = vec![0.0; base.jacobians_len()];
    base.jacobians_into(&projected, &mut jac)?;
    let scale = ts.radius / r;
    let dd = d * d;
    let mut tangential_error: f64 = 0.0;
    for xi in tangent_basis(x) {
        directional(&xi, &mut deriv)?;
        for k in 0..=m {
            let jk = &jac[k * dd..(k + 1) * dd];
            for i in 0..d {
                let expected = scale * dot(&jk[i * d..(i + 1) * d], &xi);
                tangential_error = tangential_error.max((deriv[k * d + i] - expected).abs());
            }
        }
    }
    Ok(DerivativeCheck {
        radial_norm,
        tangential_error,
    })
}
