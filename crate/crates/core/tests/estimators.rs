mod common;

use common::{abs_field, example21_default};
use flowlab::approximation::MollifiedFamily;
use flowlab::coefficients::builtin::{additive_noise, constant, geometric_bm, ornstein_uhlenbeck};
use flowlab::coefficients::ThetaSearch;
use flowlab::estimators::{
    bel_gradient, derivative_moment, family_convergence, fd_gradient, flow_moment_bound_check, holder_modulus,
    ibp_residual, krylov_check, BumpFunction, CylinderFunction, IbpBox, KrylovSpec, McConfig, Payoff,
};
use flowlab::IntegratorConfig;

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[test]
fn zero_jacobians_give_the_exact_moment() {
    let sys = constant(2, 0.7, 0.3);
    let r = derivative_moment(&sys, &[0.1, 0.2], &[3.0, 4.0], 3.0, 0.5, &McConfig::new(500, 1), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    assert!((r.value - 125.0).abs() < 1e-12);
    assert!(r.std_error < 1e-14);
}

#[test]
fn ou_derivative_moment_decays() {
    let sys = ornstein_uhlenbeck(1, 1.0, 1.0);
    let cfg = IntegratorConfig::new(1e-3, 1.0);
    let r = derivative_moment(&sys, &[0.5], &[1.0], 2.0, 1.0, &McConfig::new(200, 1), &cfg).unwrap();
    let euler = (1.0 - cfg.h).powi(2 * 1000);
    assert!((r.value - euler).abs() < 1e-12);
    assert!((r.value - (-2.0f64).exp()).abs() < 1e-3);
    assert!(r.notes.iter().any(|n| n == "outside_window"));
}

#[test]
fn gbm_second_moment_of_derivative() {
    let sys = geometric_bm(1, 0.0, 0.2);
    let r = derivative_moment(&sys, &[1.0], &[1.0], 2.0, 1.0, &McConfig::new(100_000, 3), &IntegratorConfig::new(1e-3, 1.0)).unwrap();
    let target = 0.04f64.exp();
    assert!((r.value / target - 1.0).abs() < 0.01, "{} +- {}", r.value, r.std_error);
    assert!(!r.unreliable);
}

#[test]
fn moment_bound_holds_for_zero_and_ou_coefficients() {
    let cfg = IntegratorConfig::new(0.01, 1.0);
    let mc = McConfig::new(2000, 5);
    let zero = flow_moment_bound_check(&constant(1, 0.0, 0.0), &[0.5], 1.0, 1.0, 5, &mc, &cfg, &ThetaSearch::default_for(1)).unwrap();
    assert!(zero.all_pass());
    for row in &zero.rows {
        assert!((row.lhs - 1.25).abs() < 1e-12);
        assert!(row.rhs >= 1.25);
    }
    let ou = flow_moment_bound_check(&ornstein_uhlenbeck(1, 1.0, 1.0), &[1.0], 1.0, 1.0, 10, &mc, &cfg, &ThetaSearch::default_for(1)).unwrap();
    assert!(ou.theta.value <= 1.0 + 1e-12);
    assert!(ou.all_pass());
}

#[test]
fn bel_gradient_for_additive_noise() {
    let sys = additive_noise(1, 0.5);
    let cfg = IntegratorConfig::new(0.01, 1.0);
    let mc = McConfig::new(20_000, 2);
    let r = bel_gradient(&sys, &[0.3], &[2.0], &Payoff::Identity { component: 0 }, 1.0, &mc, &cfg).unwrap();
    assert!(r.within(2.0, 3.0), "{} +- {}", r.value, r.std_error);
    let c = bel_gradient(&sys, &[0.3], &[2.0], &Payoff::Constant { value: 4.0 }, 1.0, &mc, &cfg).unwrap();
    assert!(c.value.abs() <= 3.0 * c.std_error);
}

#[test]
fn fd_gradient_for_linear_payoff_is_exact() {
    let sys = additive_noise(2, 1.0);
    let r = fd_gradient(&sys, &[0.0, 0.0], &[0.5, -1.0], &Payoff::Identity { component: 1 }, 1.0, 1e-3, &McConfig::new(100, 1), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    assert!((r.value + 1.0).abs() < 1e-9);
    assert!(r.std_error < 1e-9);
}

#[test]
fn fd_gradient_is_stable_under_delta_refinement() {
    let sys = ornstein_uhlenbeck(1, 1.0, 1.0);
    let cfg = IntegratorConfig::new(0.01, 0.5);
    let mc = McConfig::new(5000, 4);
    let f = Payoff::Sin { component: 0 };
    let a = fd_gradient(&sys, &[0.2], &[1.0], &f, 0.5, 1e-2, &mc, &cfg).unwrap();
    let b = fd_gradient(&sys, &[0.2], &[1.0], &f, 0.5, 1e-3, &mc, &cfg).unwrap();
    assert!((a.value - b.value).abs() <= 3.0 * combined(a.std_error, b.std_error).max(1e-4));
    let bel = bel_gradient(&sys, &[0.2], &[1.0], &f, 0.5, &McConfig::new(20_000, 4), &cfg).unwrap();
    assert!((bel.value - b.value).abs() <= 3.0 * combined(bel.std_error, b.std_error));
}

#[test]
fn family_of_constant_base_has_zero_gaps() {
    let fam = MollifiedFamily::new(constant(1, 0.5, 0.1)).unwrap().with_eps_ceiling(0.25);
    let table = family_convergence(&fam, &[0.2, 0.1, 0.05], &[0.0], &[1.0], 0.2, &McConfig::new(50, 1), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    for row in table.consecutive.iter().chain(&table.to_finest) {
        assert!(row.gap_x < 1e-12 && row.gap_v < 1e-12, "{row:?}");
    }
}

#[test]
fn family_of_gbm_converges() {
    // the built-in constants record the degenerate noise at the origin
    let base = geometric_bm(1, 0.1, 0.2).with_constants(common::constants());
    let fam = MollifiedFamily::new(base).unwrap().with_eps_ceiling(0.25);
    let eps = [0.2, 0.1, 0.05, 0.025];
    let table = family_convergence(&fam, &eps, &[1.0], &[1.0], 0.5, &McConfig::new(200, 2), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    assert!(table.finest_monotone(2.0));
    for row in table.consecutive.iter().filter(|r| r.eps <= 0.05) {
        assert!(row.gap_x < 1e-3 && row.gap_v < 1e-3, "{row:?}");
    }
}

#[test]
fn family_of_abs_field_is_monotone() {
    let fam = MollifiedFamily::new(abs_field()).unwrap().with_eps_ceiling(0.25);
    let table = family_convergence(&fam, &[0.2, 0.1, 0.05, 0.025], &[0.05], &[1.0], 0.2, &McConfig::new(400, 6), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    assert!(table.finest_monotone(2.0), "{:?}", table.to_finest);
}

#[test]
fn ibp_residual_for_gbm() {
    let grid = IbpBox {
        lo: -0.5,
        hi: 0.5,
        points_per_axis: 201,
    };
    let stats = ibp_residual(&geometric_bm(1, 0.1, 0.2), 0.5, &grid, &BumpFunction::centered(1, 0.4), 0, &McConfig::new(4, 1), &IntegratorConfig::new(1e-3, 1.0)).unwrap();
    assert!(stats.max < 1e-4, "{stats:?}");
    assert_eq!(stats.per_omega.len(), 4);
}

#[test]
fn ibp_residual_for_additive_noise() {
    let grid = IbpBox {
        lo: -1.0,
        hi: 1.0,
        points_per_axis: 101,
    };
    let stats = ibp_residual(&additive_noise(2, 1.0), 1.0, &grid, &BumpFunction::centered(2, 0.8), 1, &McConfig::new(3, 9), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    assert!(stats.max < 1e-6, "{stats:?}");
}

#[test]
fn krylov_with_zero_function_is_zero() {
    let spec = KrylovSpec {
        f: CylinderFunction::Zero,
        ..KrylovSpec::default()
    };
    let r = krylov_check(&example21_default(), &[0.5, 0.5], &spec, 0.5, &McConfig::new(100, 1), &IntegratorConfig::new(0.01, 1.0)).unwrap();
    assert_eq!(r.lhs, 0.0);
    assert!(r.lhs <= r.rhs);
}

#[test]
fn krylov_for_additive_noise() {
    let sigma = 0.5;
    let sys = additive_noise(1, sigma);
    let cfg = IntegratorConfig::new(0.01, 1.0);
    // a ball too large to leave gives lhs = sigma t exactly
    let wide = KrylovSpec {
        radius: 1e3,
        ..KrylovSpec::default()
    };
    let r = krylov_check(&sys, &[0.0], &wide, 1.0, &McConfig::new(100, 1), &cfg).unwrap();
    assert!((r.lhs - sigma).abs() < 1e-12);
    assert!((r.a_hat - sigma * sigma).abs() < 1e-12);
    assert_eq!(r.b_hat, 0.0);
    let small = McConfig::new(4000, 2);
    let large = McConfig::new(8000, 2);
    let a = krylov_check(&sys, &[0.0], &KrylovSpec::default(), 1.0, &small, &cfg).unwrap();
    let b = krylov_check(&sys, &[0.0], &KrylovSpec::default(), 1.0, &large, &cfg).unwrap();
    assert!(a.ratio.is_finite() && a.ratio > 0.0);
    assert!((a.ratio / b.ratio - 1.0).abs() < 0.05, "{} vs {}", a.ratio, b.ratio);
}

#[test]
fn holder_ratio_for_linear_systems() {
    let cfg = IntegratorConfig::new(1e-3, 1.0);
    let pairs = vec![(vec![0.0], vec![0.1]), (vec![1.0], vec![1.001])];
    let add = holder_modulus(&additive_noise(1, 1.0), &pairs, 2.0, 1.0, &McConfig::new(100, 1), &cfg).unwrap();
    for row in &add.rows {
        assert!((row.ratio - 1.0).abs() < 1e-9, "{row:?}");
    }
    let sigma: f64 = 0.2;
    let gbm = holder_modulus(&geometric_bm(1, 0.0, sigma), &[(vec![1.0], vec![1.01])], 2.0, 1.0, &McConfig::new(20_000, 1), &cfg).unwrap();
    let target = (sigma * sigma).exp();
    assert!((gbm.rows[0].ratio / target - 1.0).abs() < 0.01, "{:?}", gbm.rows[0]);
}

#[test]
fn holder_ratio_of_irregular_example_is_scale_free() {
    let cfg = IntegratorConfig::new(1e-3, 0.2);
    let x = vec![1.5, 0.5];
    let pairs = vec![(x.clone(), vec![1.51, 0.5]), (x.clone(), vec![1.501, 0.5])];
    let t = holder_modulus(&example21_default(), &pairs, 2.0, 0.2, &McConfig::new(2000, 3), &cfg).unwrap();
    let (a, b) = (&t.rows[0], &t.rows[1]);
    assert!((a.ratio - b.ratio).abs() <= 2.0 * combined(a.std_error, b.std_error), "{a:?} {b:?}");
}

#[test]
fn reports_are_identical_across_worker_counts() {
    let sys = example21_default();
    let cfg = IntegratorConfig::new(0.01, 0.3);
    let f = Payoff::Gaussian;
    let runs: Vec<_> = [1, 3, 8]
        .into_iter()
        .map(|w| bel_gradient(&sys, &[0.4, 0.2], &[1.0, 0.0], &f, 0.3, &McConfig::new(500, 13).with_workers(w), &cfg).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.value.to_bits(), runs[0].value.to_bits());
        assert_eq!(r.std_error.to_bits(), runs[0].std_error.to_bits());
        assert_eq!(r.csv_row("h"), runs[0].csv_row("h"));
    }
}
