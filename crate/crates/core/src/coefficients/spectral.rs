//! Diffusion matrix, right inverse of the diffusion map and the `K_p`
//! spectral functional.

use serde::Serialize;

use super::system::CoefficientSystem;
use crate::error::{FlowError, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot, max_eigenvalue, sym_eigenvalues};

/// Largest condition number of `A(x)` accepted by the right inverse.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

/// `A = sum_k X_k X_k^T` from a flat value buffer (row 0 is the drift).
pub fn diffusion_from_values(values: &[f64], d: usize, m: usize, out: &mut [f64]) {
    out[..d * d].iter_mut().for_each(|v| *v = 0.0);
    for k in 1..=m {
        let xk = &values[k * d..(k + 1) * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += xk[i] * xk[j];
            }
        }
    }
}

/// The `d x d` diffusion matrix `a_ij(x) = sum_k X_ki(x) X_kj(x)`, row-major.
pub fn diffusion_matrix(sys: &CoefficientSystem, x: &[f64]) -> Result<Vec<f64>> {
    let d = sys.dim();
    let mut values = vec![0.0; sys.values_len()];
    sys.values_into(x, &mut values)?;
    let mut a = vec![0.0; d * d];
    diffusion_from_values(&values, d, sys.noise_dim(), &mut a);
    Ok(a)
}

/// Scratch space for repeated right-inverse applications.
#[derive(Debug, Clone)]
pub struct RightInverse {
    d: usize,
    m: usize,
    cond_limit: f64,
    a: Vec<f64>,
    z: Vec<f64>,
}

impl RightInverse {
    pub fn new(d: usize, m: usize, cond_limit: f64) -> Self {
        Self {
            d,
            m,
            cond_limit,
            a: vec![0.0; d * d],
            z: vec![0.0; d],
        }
    }

    /// `Y(x) xi = Sigma^T A^{-1} xi` with `Sigma = [X_1 .. X_m]`, given the
    /// field values at `x`. `out` has length `m`.
    pub fn apply(&mut self, values: &[f64], x: &[f64], xi: &[f64], out: &mut [f64]) -> Result<()> {
        let (d, m) = (self.d, self.m);
        diffusion_from_values(values, d, m, &mut self.a);
        let (lo, hi) = if d == 1 {
            (self.a[0], self.a[0])
        } else {
            let ev = sym_eigenvalues(&self.a, d);
            (ev[0], ev[d - 1])
        };
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(lo > 0.0) || !(cond <= self.cond_limit) {
            return Err(FlowError::NearSingularDiffusion {
                point: x.to_vec(),
                min_eigenvalue: lo,
                condition: cond,
            });
        }
        if !cholesky_in_place(&mut self.a, d) {
            return Err(FlowError::NearSingularDiffusion {
                point: x.to_vec(),
                min_eigenvalue: lo,
                condition: cond,
            });
        }
        self.z.copy_from_slice(xi);
        cholesky_solve(&self.a, d, &mut self.z);
        for k in 0..m {
            out[k] = dot(&values[(k + 1) * d..(k + 2) * d], &self.z);
        }
        Ok(())
    }
}

/// Right inverse of the diffusion map applied to `xi`, with the default
/// condition-number gate.
pub fn right_inverse_apply(sys: &CoefficientSystem, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    let (d, m) = (sys.dim(), sys.noise_dim());
    if xi.len() != d {
        return Err(FlowError::Dimension {
            expected: d,
            got: xi.len(),
        });
    }
    let mut values = vec![0.0; sys.values_len()];
    sys.values_into(x, &mut values)?;
    let mut out = vec![0.0; m];
    RightInverse::new(d, m, DEFAULT_CONDITION_LIMIT).apply(&values, x, xi, &mut out)?;
    Ok(out)
}

/// `X(x) eta = sum_k eta_k X_k(x)`.
pub fn diffusion_map_apply(sys: &CoefficientSystem, x: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    let d = sys.dim();
    let mut values = vec![0.0; sys.values_len()];
    sys.values_into(x, &mut values)?;
    let mut out = vec![0.0; d];
    for (k, e) in eta.iter().enumerate() {
        for i in 0..d {
            out[i] += e * values[(k + 1) * d + i];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub x: Vec<f64>,
    pub p: f64,
    pub kp: f64,
    /// The symmetric matrix whose top eigenvalue is `kp`, row-major.
    pub matrix: Vec<f64>,
}

/// `p (J_0 + J_0^T) + (2p - 1) p sum_k J_k^T J_k` from a flat Jacobian buffer.
pub fn kp_matrix(jac: &[f64], d: usize, m: usize, p: f64) -> Vec<f64> {
    let dd = d * d;
    let mut h = vec![0.0; dd];
    let j0 = &jac[..dd];
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] = p * (j0[i * d + j] + j0[j * d + i]);
        }
    }
    let w = (2.0 * p - 1.0) * p;
    for k in 1..=m {
        let jk = &jac[k * dd..(k + 1) * dd];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += jk[l * d + i] * jk[l * d + j];
                }
                h[i * d + j] += w * s;
            }
        }
    }
    h
}

/// The quadratic form `H_p(x)(xi, xi)` evaluated term by term.
pub fn hp_form(jac: &[f64], d: usize, m: usize, p: f64, xi: &[f64]) -> f64 {
    let dd = d * d;
    let mut jv = vec![0.0; d];
    crate::linalg::mat_vec(&jac[..dd], xi, &mut jv);
    let mut total = 2.0 * p * dot(&jv, xi);
    for k in 1..=m {
        crate::linalg::mat_vec(&jac[k * dd..(k + 1) * dd], xi, &mut jv);
        total += (2.0 * p - 1.0) * p * dot(&jv, &jv);
    }
    total
}

/// `K_p(x) = sup_{|xi| = 1} H_p(x)(xi, xi)` via a symmetric eigensolve.
pub fn kp_max(sys: &CoefficientSystem, x: &[f64], p: f64) -> Result<SpectralReport> {
    let (d, m) = (sys.dim(), sys.noise_dim());
    let mut jac = vec![0.0; sys.jacobians_len()];
    sys.jacobians_into(x, &mut jac)?;
    let matrix = kp_matrix(&jac, d, m, p);
    let kp = max_eigenvalue(&matrix, d);
    Ok(SpectralReport {
        x: x.to_vec(),
        p,
        kp,
        matrix,
    })
}
