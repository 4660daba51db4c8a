#![allow(dead_code)]

use std::sync::Arc;

use flowlab::coefficients::builtin::{self, IrregularParams};
use flowlab::coefficients::{AssumptionConstants, KappaRule, OriginPolicy, VectorFields};
use flowlab::CoefficientSystem;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct Probe(ChaCha8Rng);

impl Probe {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn direction(&mut self, d: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| self.uniform(-1.0, 1.0)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-3 && n <= 1.0 {
                return v.iter().map(|a| a / n).collect();
            }
        }
    }

    /// Point with norm `r` in a random direction.
    pub fn on_sphere(&mut self, d: usize, r: f64) -> Vec<f64> {
        self.direction(d).into_iter().map(|a| a * r).collect()
    }
}

pub fn example21_default() -> CoefficientSystem {
    builtin::example21(&IrregularParams {
        d: 2,
        q1: 0.8,
        q2: 0.5,
        q3: 0.5,
        q4: 1.0,
        r_min: 1e-6,
    })
    .unwrap()
}

pub fn constants() -> AssumptionConstants {
    AssumptionConstants {
        p1: 1.0,
        p2: 1.0,
        p3: 8.0,
        p4: 4.0,
        p5: 1.0,
        c1: 1.0,
        c2: 1.0,
        c3: 1.0,
        r1: 1.0,
        delta: 1.0,
        kappa: KappaRule::default(),
    }
}

/// `X_0(x) = X_1(x) = x`.
#[derive(Debug)]
pub struct IdentityField(pub usize);

impl VectorFields for IdentityField {
    fn dim(&self) -> usize {
        self.0
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn values(&self, x: &[f64], out: &mut [f64]) {
        let d = self.0;
        out[..d].copy_from_slice(x);
        out[d..2 * d].copy_from_slice(x);
    }

    fn jacobians(&self, _x: &[f64], out: &mut [f64]) -> bool {
        let d = self.0;
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..2 {
            for i in 0..d {
                out[k * d * d + i * d + i] = 1.0;
            }
        }
        true
    }
}

pub fn identity_field(d: usize) -> CoefficientSystem {
    CoefficientSystem::new("identity_field", Arc::new(IdentityField(d)), constants(), OriginPolicy::Regular)
}

/// `X_0 = 0`, `X_1(x) = |x| e_1` in `d = 1`.
#[derive(Debug)]
pub struct AbsField;

impl VectorFields for AbsField {
    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn values(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = x[0].abs();
    }
}

pub fn abs_field() -> CoefficientSystem {
    CoefficientSystem::new("abs_field", Arc::new(AbsField), constants(), OriginPolicy::Regular)
}
