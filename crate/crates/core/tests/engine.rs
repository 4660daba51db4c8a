mod common;

use common::example21_default;
use flowlab::coefficients::builtin::{additive_noise, geometric_bm};
use flowlab::engine::{fill_increments, integrate, log_exponential_check, multi_start, sample_path};
use flowlab::estimators::sample_stats;
use flowlab::IntegratorConfig;

#[test]
fn single_step_increments_have_variance_h() {
    let h = 0.01;
    let draws: Vec<f64> = (0..100_000).map(|i| sample_path(11, i, 1, h, 1).increments[0]).collect();
    let (mean, se) = sample_stats(&draws);
    let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    assert!((0.0098..=0.0102).contains(&var), "var {var}");
    assert!(mean.abs() < 4.0 * se);
}

#[test]
fn increments_do_not_depend_on_how_they_are_requested() {
    let path = sample_path(5, 17, 40, 0.02, 3);
    let mut out = vec![0.0; 120];
    fill_increments(5, 17, 0.02, &mut out);
    assert_eq!(path.increments, out);
    let short = sample_path(5, 17, 10, 0.02, 3);
    assert_eq!(&path.increments[..30], &short.increments[..]);
}

#[test]
fn gbm_strong_error_shrinks_like_root_h() {
    let (mu, sigma, x0) = (0.1, 0.2, 1.0);
    let sys = geometric_bm(1, mu, sigma);
    let mut errors = Vec::new();
    let hs = [1e-2, 1e-3, 1e-4];
    for h in hs {
        let cfg = IntegratorConfig::new(h, 1.0);
        let n = cfg.n_steps();
        let mut total = 0.0;
        let paths = 200;
        for i in 0..paths {
            let path = sample_path(21, i, n, h, 1);
            let traj = integrate(&sys, &[x0], &[1.0], &path, &cfg).unwrap();
            let w: f64 = path.increments.iter().sum();
            let exact = x0 * ((mu - 0.5 * sigma * sigma) * n as f64 * h + sigma * w).exp();
            total += (traj.final_x()[0] - exact).abs();
        }
        errors.push(total / paths as f64);
    }
    let slope = (errors[0] / errors[2]).log10() / 2.0;
    assert!(slope >= 0.45, "errors {errors:?}, slope {slope}");
}

#[test]
fn multi_start_matches_separate_runs() {
    let sys = example21_default();
    let cfg = IntegratorConfig::new(0.01, 0.5);
    let path = sample_path(3, 9, cfg.n_steps(), cfg.h, sys.noise_dim());
    let starts = vec![vec![0.3, -0.2], vec![2.0, 1.0], vec![-4.0, 0.5]];
    let together = multi_start(&sys, &starts, &[1.0, 0.0], &path, &cfg).unwrap();
    for (x0, traj) in starts.iter().zip(&together) {
        let alone = integrate(&sys, x0, &[1.0, 0.0], &path, &cfg).unwrap();
        assert_eq!(alone.xs, traj.xs);
        assert_eq!(alone.vs, traj.vs);
    }
}

#[test]
fn additive_noise_keeps_start_offsets() {
    let sys = additive_noise(2, 0.8);
    let cfg = IntegratorConfig::new(0.01, 1.0);
    let path = sample_path(4, 0, cfg.n_steps(), cfg.h, 2);
    let starts = vec![vec![0.0, 0.0], vec![1.5, -2.0]];
    let trajs = multi_start(&sys, &starts, &[0.0, 1.0], &path, &cfg).unwrap();
    for i in 0..trajs[0].len() {
        let (a, b) = (trajs[0].x(i), trajs[1].x(i));
        assert!((b[0] - a[0] - 1.5).abs() < 1e-12);
        assert!((b[1] - a[1] + 2.0).abs() < 1e-12);
        assert_eq!(trajs[0].v(i), &[0.0, 1.0]);
    }
}

#[test]
fn gbm_exponential_representation_is_first_order() {
    let sys = geometric_bm(1, 0.1, 0.2);
    for h in [1e-2, 1e-3] {
        let cfg = IntegratorConfig::new(h, 1.0);
        let mut gaps = Vec::new();
        for i in 0..50 {
            let path = sample_path(8, i, cfg.n_steps(), h, 1);
            let traj = integrate(&sys, &[1.0], &[1.0], &path, &cfg).unwrap();
            gaps.push(log_exponential_check(&sys, &traj, &path, 2.0, &cfg).unwrap().relative_gap());
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(mean < 5.0 * h, "h {h}: mean gap {mean}");
    }
}

#[test]
fn irregular_example_integrates_without_clamping_away_from_origin() {
    let sys = example21_default();
    let cfg = IntegratorConfig::new(1e-3, 0.2);
    for i in 0..20 {
        let path = sample_path(1, i, cfg.n_steps(), cfg.h, sys.noise_dim());
        let a = integrate(&sys, &[2.0, 2.0], &[1.0, 0.0], &path, &cfg).unwrap();
        let b = integrate(&sys, &[2.0, 2.0], &[1.0, 0.0], &path, &cfg).unwrap();
        assert!(!a.exploded());
        assert_eq!(a.clamped, 0);
        assert_eq!(a.xs, b.xs);
        assert!(a.xs.iter().chain(&a.vs).all(|v| v.is_finite()));
    }
}

#[test]
fn trajectory_csv_has_header_and_strided_rows() {
    let sys = additive_noise(1, 1.0);
    let cfg = IntegratorConfig::new(0.1, 1.0);
    let path = sample_path(1, 0, cfg.n_steps(), cfg.h, 1);
    let traj = integrate(&sys, &[0.0], &[1.0], &path, &cfg).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf, 5).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,v1,exploded,clamped");
    // rows 0, 5, 10
    assert_eq!(lines.len(), 4);
}
