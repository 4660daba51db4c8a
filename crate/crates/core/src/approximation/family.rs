//! The smooth family `X_k^eps = X~_{k, R(eps)} * eta_eps`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::mollifier::Mollifier;
use super::truncation::{truncate, TruncatedSystem};
use crate::coefficients::{AssumptionConstants, CoefficientSystem, OriginPolicy, VectorFields};
use crate::error::{FlowError, Result};
use crate::linalg::norm;
use crate::quadrature::BallResolution;

/// Picks the truncation exponent `lambda0` and the admissible ceiling `eps0`:
///
/// `lambda0 = 1/2 min(iota / (p1 + p2), 1 / (p1 + p2 + p5))`, `iota = 1 - d / p3`,
/// `eps0 = min((R1 + 2)^{-1/lambda0}, delta / 4)`.
pub fn select_lambda0(c: &AssumptionConstants, d: usize) -> Result<(f64, f64)> {
    c.validate(d)?;
    let iota = c.iota(d);
    let lambda0 = 0.5 * (iota / (c.p1 + c.p2)).min(1.0 / (c.p1 + c.p2 + c.p5));
    let eps0 = (c.r1 + 2.0).powf(-1.0 / lambda0).min(c.delta / 4.0);
    Ok((lambda0, eps0))
}

/// Convolution of a truncated system with a mollifier.
#[derive(Debug)]
pub struct MollifiedFields {
    truncated: TruncatedSystem,
    mollifier: Mollifier,
}

impl MollifiedFields {
    pub fn new(truncated: TruncatedSystem, mollifier: Mollifier) -> Self {
        Self {
            truncated,
            mollifier,
        }
    }
}

impl VectorFields for MollifiedFields {
    fn dim(&self) -> usize {
        self.truncated.base().dim()
    }

    fn noise_dim(&self) -> usize {
        self.truncated.base().noise_dim()
    }

    fn values(&self, x: &[f64], out: &mut [f64]) {
        let ts = &self.truncated;
        if self
            .mollifier
            .convolve(x, out, |y, buf| ts.values_into(y, buf))
            .is_err()
        {
            out.iter_mut().for_each(|v| *v = f64::NAN);
        }
    }

    /// Inside `|x| + eps < R` the truncation is inactive and the Jacobian is
    /// the mollified base Jacobian; elsewhere finite differences are used.
    fn jacobians(&self, x: &[f64], out: &mut [f64]) -> bool {
        let base = self.truncated.base();
        if norm(x) + self.mollifier.eps() >= self.truncated.radius() {
            return false;
        }
        let res = self.mollifier.convolve(x, out, |y, buf| match base.clamp_to_regular(y) {
            Some(c) => base.jacobians_into(&c, buf).map(|_| ()),
            None => base.jacobians_into(y, buf).map(|_| ()),
        });
        res.is_ok()
    }
}

/// The `eps`-indexed family built from one base system. Members are cached
/// per `eps`; building the same member twice yields identical systems.
#[derive(Debug)]
pub struct MollifiedFamily {
    base: CoefficientSystem,
    lambda0: f64,
    eps0: f64,
    resolution: BallResolution,
    cache: RwLock<HashMap<u64, CoefficientSystem>>,
}

impl MollifiedFamily {
    pub fn new(base: CoefficientSystem) -> Result<Self> {
        let res = BallResolution::default_for(base.dim());
        Self::with_resolution(base, res)
    }

    pub fn with_resolution(base: CoefficientSystem, resolution: BallResolution) -> Result<Self> {
        if base.dim() > 3 {
            return Err(FlowError::InvalidArgument(
                "mollification is provided for d <= 3".into(),
            ));
        }
        let (lambda0, eps0) = select_lambda0(base.constants(), base.dim())?;
        Ok(Self {
            base,
            lambda0,
            eps0,
            resolution,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// Replaces the admissible ceiling `eps0`.
    pub fn with_eps_ceiling(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self.cache.write().expect("poisoned").clear();
        self
    }

    pub fn base(&self) -> &CoefficientSystem {
        &self.base
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn resolution(&self) -> BallResolution {
        self.resolution
    }

    /// `max(eps^{-lambda0}, R1 + 2)`; equal to `eps^{-lambda0}` below the
    /// formula ceiling.
    pub fn truncation_radius(&self, eps: f64) -> f64 {
        eps.powf(-self.lambda0).max(self.base.constants().r1 + 2.0)
    }

    pub fn member(&self, eps: f64) -> Result<CoefficientSystem> {
        if !(eps > 0.0 && eps < self.eps0) {
            return Err(FlowError::EpsOutOfRange {
                eps,
                eps0: self.eps0,
            });
        }
        let key = eps.to_bits();
        if let Some(s) = self.cache.read().expect("poisoned").get(&key) {
            return Ok(s.clone());
        }
        let truncated = truncate(&self.base, self.truncation_radius(eps))?;
        let mollifier = Mollifier::new(self.base.dim(), eps, self.resolution);
        let sys = CoefficientSystem::new(
            format!("{}^eps={eps}", self.base.label()),
            Arc::new(MollifiedFields::new(truncated, mollifier)),
            *self.base.constants(),
            OriginPolicy::Regular,
        )
        .with_fd_step(self.base.fd_step());
        self.cache
            .write()
            .expect("poisoned")
            .insert(key, sys.clone());
        Ok(sys)
    }
}

/// Free-function form of [`MollifiedFamily::member`].
pub fn family_member(fam: &MollifiedFamily, eps: f64) -> Result<CoefficientSystem> {
    fam.member(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin::{self, IrregularParams};
    use crate::coefficients::KappaRule;

    fn constants(p1: f64, p2: f64, p3: f64, p5: f64) -> AssumptionConstants {
        AssumptionConstants {
            p1,
            p2,
            p3,
            p4: 4.0,
            p5,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            r1: 1.0,
            delta: 1.0,
            kappa: KappaRule::default(),
        }
    }

    #[test]
    fn lambda0_worked_example() {
        let (l, e) = select_lambda0(&constants(1.0, 1.0, 8.0, 1.0), 2).unwrap();
        assert!((l - 1.0 / 6.0).abs() < 1e-15);
        assert!((e - 3f64.powf(-6.0)).abs() < 1e-15);
    }

    #[test]
    fn lambda0_decreases_in_p5() {
        let mut last = f64::INFINITY;
        for p5 in [1.0, 10.0, 100.0, 1e4] {
            let (l, _) = select_lambda0(&constants(1.0, 1.0, 8.0, p5), 2).unwrap();
            assert!(l <= last);
            last = l;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn invalid_constants_are_rejected() {
        assert!(select_lambda0(&constants(1.0, 1.0, 5.0, 1.0), 2).is_err());
    }

    fn ex21() -> CoefficientSystem {
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

    #[test]
    fn member_range_is_enforced() {
        let fam = MollifiedFamily::new(ex21()).unwrap();
        assert!(fam.member(fam.eps0() * 0.5).is_ok());
        assert!(matches!(
            fam.member(0.1),
            Err(FlowError::EpsOutOfRange { .. })
        ));
        let fam = fam.with_eps_ceiling(0.25);
        assert!(fam.member(0.1).is_ok());
    }

    #[test]
    fn constant_base_is_a_fixed_point() {
        let base = builtin::constant(2, 0.8, 0.4);
        let fam = MollifiedFamily::new(base.clone()).unwrap().with_eps_ceiling(0.5);
        let mem = fam.member(0.2).unwrap();
        for x in [[0.0, 0.0], [0.5, -2.0]] {
            for k in 0..3 {
                let a = mem.value(k, &x).unwrap();
                let b = base.value(k, &x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn example21_member_near_origin() {
        let fam = MollifiedFamily::new(ex21()).unwrap().with_eps_ceiling(0.25);
        let iota = fam.base().constants().iota(2);
        for eps in [0.2, 0.05, 0.01] {
            let mem = fam.member(eps).unwrap();
            for k in 1..=2 {
                let v = mem.value(k, &[0.0, 0.0]).unwrap();
                let mut e = [0.0, 0.0];
                e[k - 1] = 1.0;
                let err = ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2)).sqrt();
                assert!(err <= eps.powf(iota), "eps={eps}: {err}");
            }
        }
    }

    #[test]
    fn repeated_members_are_identical() {
        let fam = MollifiedFamily::new(ex21()).unwrap().with_eps_ceiling(0.25);
        let a = fam.member(0.1).unwrap().value(0, &[0.3, 0.2]).unwrap();
        let fresh = MollifiedFamily::new(ex21()).unwrap().with_eps_ceiling(0.25);
        let b = fresh.member(0.1).unwrap().value(0, &[0.3, 0.2]).unwrap();
        assert_eq!(a, b);
    }
}
