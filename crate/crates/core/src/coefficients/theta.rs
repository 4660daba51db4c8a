//! The exponential-moment functional `Theta_g(lambda)` for
//! `g(x) = log(1 + |x|^2)`.

use serde::Serialize;

use super::system::CoefficientSystem;
use crate::error::Result;
use crate::grid::BoxGrid;
use crate::linalg::dot;

/// Caller-supplied tail bound: outside `|x| > radius` the integrand is known
/// to stay below `bound`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailCertificate {
    pub radius: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ThetaSearch {
    pub lo: f64,
    pub hi: f64,
    pub points_per_axis: usize,
    pub tail: Option<TailCertificate>,
}

impl ThetaSearch {
    pub fn default_for(d: usize) -> Self {
        let points_per_axis = match d {
            1 | 2 => 401,
            3 => 81,
            _ => 21,
        };
        Self {
            lo: -50.0,
            hi: 50.0,
            points_per_axis,
            tail: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaBound {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// `true` only when a tail certificate makes the grid maximum a bound on
    /// the global supremum.
    pub certified: bool,
}

/// `Dg(X_0) + 1/2 sum_k (lambda |Dg(X_k)|^2 + D^2 g(X_k, X_k))` at `x`,
/// given the field values there.
pub fn theta_integrand(values: &[f64], x: &[f64], d: usize, m: usize, lambda: f64) -> f64 {
    let s = 1.0 + dot(x, x);
    let drift = &values[..d];
    let mut total = 2.0 * dot(x, drift) / s;
    for k in 1..=m {
        let xk = &values[k * d..(k + 1) * d];
        let dg = 2.0 * dot(x, xk) / s;
        let hess = 2.0 * dot(xk, xk) / s - 4.0 * dot(x, xk).powi(2) / (s * s);
        total += 0.5 * (lambda * dg * dg + hess);
    }
    total
}

pub fn theta_g(sys: &CoefficientSystem, lambda: f64, search: &ThetaSearch) -> Result<ThetaBound> {
    let (d, m) = (sys.dim(), sys.noise_dim());
    let grid = BoxGrid::new(d, search.lo, search.hi, search.points_per_axis);
    let mut values = vec![0.0; sys.values_len()];
    let mut x = vec![0.0; d];
    let mut best = f64::NEG_INFINITY;
    let mut argmax = vec![0.0; d];
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        sys.values_into(&x, &mut values)?;
        let v = theta_integrand(&values, &x, d, m, lambda);
        if v > best {
            best = v;
            argmax.copy_from_slice(&x);
        }
    }
    let half_width = 0.5 * (search.hi - search.lo);
    let centre_ok = search.lo <= 0.0 && search.hi >= 0.0;
    let certified = search.tail.is_some_and(|t| {
        centre_ok && t.radius <= half_width.min(-search.lo).min(search.hi) && best >= t.bound
    });
    Ok(ThetaBound {
        value: best,
        argmax,
        certified,
    })
}
