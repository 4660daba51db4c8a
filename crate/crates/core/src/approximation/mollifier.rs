//! The standard smooth mollifier `eta(y) = C exp(1 / (|y|^2 - 1))` on the
//! unit ball and convolution against it.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::truncation::TruncatedSystem;
use crate::error::Result;
use crate::quadrature::{BallResolution, BallRule};

/// Unnormalised bump `exp(1 / (|u|^2 - 1))`, zero outside the open ball.
pub fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 / (r2 - 1.0)).exp()
    } else {
        0.0
    }
}

/// Normalisation constant `C` such that `C * int bump = 1` under the given
/// ball rule. Cached per `(d, resolution)`.
pub fn normalisation_constant(d: usize, res: BallResolution) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, res.radial, res.angular);
    if let Some(c) = cache.lock().expect("poisoned").get(&key) {
        return *c;
    }
    let rule = BallRule::new(d, res);
    let mass: f64 = (0..rule.len())
        .map(|i| {
            let u = rule.node(i);
            rule.weights[i] * bump(u.iter().map(|v| v * v).sum())
        })
        .sum();
    let c = 1.0 / mass;
    cache.lock().expect("poisoned").insert(key, c);
    c
}

/// `eta_eps(y) = eps^{-d} eta(y / eps)` discretised on a ball rule.
#[derive(Debug, Clone)]
pub struct Mollifier {
    d: usize,
    eps: f64,
    resolution: BallResolution,
    norm_constant: f64,
    /// flat `eps * u_i`
    offsets: Vec<f64>,
    /// `w_i * eta(u_i)`; sums to one
    kernel_weights: Vec<f64>,
}

impl Mollifier {
    pub fn new(d: usize, eps: f64, resolution: BallResolution) -> Self {
        let rule = BallRule::new(d, resolution);
        let c = normalisation_constant(d, resolution);
        let mut offsets = Vec::with_capacity(rule.nodes.len());
        let mut kernel_weights = Vec::with_capacity(rule.len());
        for i in 0..rule.len() {
            let u = rule.node(i);
            let w = rule.weights[i] * c * bump(u.iter().map(|v| v * v).sum());
            // nodes where the bump underflows contribute nothing
            if w > 0.0 {
                offsets.extend(u.iter().map(|v| v * eps));
                kernel_weights.push(w);
            }
        }
        Self {
            d,
            eps,
            resolution,
            norm_constant: c,
            offsets,
            kernel_weights,
        }
    }

    pub fn with_default_resolution(d: usize, eps: f64) -> Self {
        Self::new(d, eps, BallResolution::default_for(d))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn resolution(&self) -> BallResolution {
        self.resolution
    }

    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn len(&self) -> usize {
        self.kernel_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel_weights.is_empty()
    }

    /// `eta_eps(y)`.
    pub fn density(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum::<f64>() / (self.eps * self.eps);
        self.norm_constant * bump(r2) / self.eps.powi(self.d as i32)
    }

    /// Quadrature of `eta_eps` over its support.
    pub fn mass(&self) -> f64 {
        self.kernel_weights.iter().sum()
    }

    pub fn offset(&self, i: usize) -> &[f64] {
        &self.offsets[i * self.d..(i + 1) * self.d]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.kernel_weights[i]
    }

    /// `sum_i w_i f(x - eps u_i)` for a vector-valued `f` of length `out.len()`.
    pub fn convolve<F>(&self, x: &[f64], out: &mut [f64], mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let mut shifted = vec![0.0; self.d];
        let mut buf = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.len() {
            let off = self.offset(i);
            for j in 0..self.d {
                shifted[j] = x[j] - off[j];
            }
            f(&shifted, &mut buf)?;
            let w = self.kernel_weights[i];
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MollifiedValue {
    pub value: Vec<f64>,
    /// Difference against the same convolution at half the resolution.
    pub error_estimate: f64,
}

/// `(X~_k * eta_eps)(x)` by ball quadrature, with a resolution-halving
/// self-estimate of the quadrature error.
pub fn mollify_value(ts: &TruncatedSystem, mol: &Mollifier, k: usize, x: &[f64]) -> Result<MollifiedValue> {
    let d = ts.base().dim();
    let n = ts.base().values_len();
    let eval = |y: &[f64], out: &mut [f64]| ts.values_into(y, out);
    let mut full = vec![0.0; n];
    mol.convolve(x, &mut full, eval)?;
    let coarse_res = BallResolution {
        radial: (mol.resolution.radial / 2).max(2),
        angular: if d == 3 { mol.resolution.angular } else { (mol.resolution.angular / 2).max(2) },
    };
    let coarse_mol = Mollifier::new(d, mol.eps, coarse_res);
    let mut coarse = vec![0.0; n];
    coarse_mol.convolve(x, &mut coarse, eval)?;
    let value = full[k * d..(k + 1) * d].to_vec();
    let error_estimate = value
        .iter()
        .zip(&coarse[k * d..(k + 1) * d])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MollifiedValue {
        value,
        error_estimate,
    })
}
