mod common;

use std::sync::Arc;

use common::{constants, example21_default, identity_field, Probe};
use flowlab::approximation::{radial_tangential_derivative_check, truncate, MollifiedFamily};
use flowlab::coefficients::{OriginPolicy, VectorFields};
use flowlab::CoefficientSystem;

/// `X_0 = 0`, `X_1(x) = |x|^2` in `d = 1`.
#[derive(Debug)]
struct Square;

impl VectorFields for Square {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn values(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = x[0] * x[0];
    }
}

#[test]
fn truncated_square_is_frozen_outside_the_ball() {
    let sys = CoefficientSystem::new("square", Arc::new(Square), constants(), OriginPolicy::Regular);
    let ts = truncate(&sys, 5.0).unwrap();
    let mut out = [0.0; 2];
    ts.values_into(&[7.0], &mut out).unwrap();
    assert_eq!(out[1], 25.0);
    ts.values_into(&[-7.0], &mut out).unwrap();
    assert_eq!(out[1], 25.0);
    ts.values_into(&[3.0], &mut out).unwrap();
    assert_eq!(out[1], 9.0);
}

#[test]
fn truncated_example_matches_base_on_the_sphere() {
    let sys = example21_default();
    let ts = truncate(&sys, 10.0).unwrap();
    let mut a = vec![0.0; sys.values_len()];
    let mut b = vec![0.0; sys.values_len()];
    ts.values_into(&[20.0, 0.0], &mut a).unwrap();
    sys.values_into(&[10.0, 0.0], &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncated_identity_has_ray_frozen_derivatives() {
    let ts = truncate(&identity_field(3), 4.0).unwrap();
    let mut probe = Probe::new(2);
    for _ in 0..10 {
        let r = probe.uniform(4.5, 30.0);
        let x = probe.on_sphere(3, r);
        let check = radial_tangential_derivative_check(&ts, &x, 1e-5).unwrap();
        assert!(check.radial_norm < 1e-6);
        assert!(check.tangential_error < 1e-4);
    }
}

#[test]
fn family_rejects_eps_above_ceiling() {
    let fam = MollifiedFamily::new(identity_field(1)).unwrap();
    assert!(fam.member(fam.eps0() * 2.0).is_err());
    assert!(fam.member(0.0).is_err());
    let member = fam.member(fam.eps0() / 2.0).unwrap();
    let v = member.value(1, &[0.3]).unwrap();
    assert!((v[0] - 0.3).abs() < 1e-8);
}

#[test]
fn truncation_radius_never_drops_below_the_regular_region() {
    let fam = MollifiedFamily::new(example21_default()).unwrap().with_eps_ceiling(0.25);
    let r1 = fam.base().constants().r1;
    for eps in [0.2, 0.1, 1e-3, 1e-6] {
        let r = fam.truncation_radius(eps);
        assert!(r >= r1 + 2.0);
        assert!(r >= eps.powf(-fam.lambda0()) * (1.0 - 1e-15));
    }
}
