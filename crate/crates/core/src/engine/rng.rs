//! Reproducible Brownian increments.
//!
//! Every path owns a ChaCha8 keystream: the key is derived from the master
//! seed and the stream id is the path index, so increment `(step, k)` of path
//! `i` is a pure function of `(master_seed, i, step, k)` and never depends on
//! scheduling. Uniforms are mapped to Gaussians by the inverse normal CDF.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use statrs::function::erf::erfc_inv;

/// Open-interval uniform from the top 53 bits.
#[inline]
fn uniform_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal quantile `Phi^{-1}(u)`.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub path_index: u64,
}

/// Brownian increments on a uniform grid, `n_steps x m`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub n_steps: usize,
    pub h: f64,
    pub m: usize,
    pub increments: Vec<f64>,
    pub provenance: Provenance,
}

impl BrownianPath {
    #[inline]
    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.m..(step + 1) * self.m]
    }

    /// `W_t` at grid time `step * h` for component `k`.
    pub fn value_at(&self, step: usize, k: usize) -> f64 {
        (0..step).map(|s| self.increments[s * self.m + k]).sum()
    }
}

pub fn sample_path(master_seed: u64, path_index: u64, n_steps: usize, h: f64, m: usize) -> BrownianPath {
    let mut increments = vec![0.0; n_steps * m];
    fill_increments(master_seed, path_index, h, &mut increments);
    BrownianPath {
        n_steps,
        h,
        m,
        increments,
        provenance: Provenance {
            master_seed,
            path_index,
        },
    }
}

/// Fills `out` with consecutive `N(0, h)` draws of the given path.
pub fn fill_increments(master_seed: u64, path_index: u64, h: f64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    let sd = h.sqrt();
    for v in out.iter_mut() {
        *v = sd * normal_quantile(uniform_open(rng.next_u64()));
    }
}
