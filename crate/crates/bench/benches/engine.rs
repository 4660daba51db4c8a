use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use flowlab::approximation::{BallResolution, MollifiedFamily};
use flowlab::engine::{integrate, sample_path};
use flowlab::estimators::{bel_gradient, McConfig, Payoff};
use flowlab_bench::{example21, ou, short_horizon};

fn rng(c: &mut Criterion) {
    c.bench_function("sample_path 1000x2", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            black_box(sample_path(7, i, 1000, 1e-3, 2))
        })
    });
}

fn integration(c: &mut Criterion) {
    let cfg = short_horizon();
    let path = sample_path(7, 0, cfg.n_steps(), cfg.h, 2);
    let sys = example21();
    c.bench_function("integrate example21 100 steps", |b| {
        b.iter(|| integrate(&sys, black_box(&[0.5, 0.2]), &[1.0, 0.0], &path, &cfg).unwrap())
    });
    let ou = ou();
    let path1 = sample_path(7, 0, cfg.n_steps(), cfg.h, 1);
    c.bench_function("integrate ou 100 steps", |b| {
        b.iter(|| integrate(&ou, black_box(&[0.5]), &[1.0], &path1, &cfg).unwrap())
    });
}

fn mollified(c: &mut Criterion) {
    let fam = MollifiedFamily::with_resolution(example21(), BallResolution { radial: 8, angular: 16 })
        .unwrap()
        .with_eps_ceiling(0.25);
    let member = fam.member(0.1).unwrap();
    let mut out = vec![0.0; member.values_len()];
    c.bench_function("mollified example21 values", |b| {
        b.iter(|| member.values_into(black_box(&[0.3, -0.2]), &mut out).unwrap())
    });
}

fn estimator(c: &mut Criterion) {
    let sys = ou();
    let cfg = short_horizon();
    let mc = McConfig::new(200, 3).with_workers(1);
    c.bench_function("bel_gradient ou 200 paths", |b| {
        b.iter(|| bel_gradient(&sys, &[0.0], &[1.0], &Payoff::Identity { component: 0 }, 0.1, &mc, &cfg).unwrap())
    });
}

criterion_group!(benches, rng, integration, mollified, estimator);
criterion_main!(benches);
