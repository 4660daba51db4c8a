use super::moments::check_point;
use super::report::{collect, run_paths, EstimateReport, McConfig, PathResult, Payoff};
use crate::coefficients::{CoefficientSystem, RightInverse, DEFAULT_CONDITION_LIMIT};
use crate::engine::{integrate_with, sample_path, Coupling, IntegratorConfig, Workspace};
use crate::error::{FlowError, Result};
use crate::linalg::dot;

/// Bismut–Elworthy–Li estimate of `D_x (P_t f)(v)`:
/// the mean of `f(F_t(x)) / t * sum_s <Y(x_s) V_s, dW_s>` with the Itô sum
/// taken at left points.
pub fn bel_gradient(
    sys: &CoefficientSystem,
    x: &[f64],
    v: &[f64],
    f: &Payoff,
    t: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<EstimateReport> {
    bel_gradient_with_limit(sys, x, v, f, t, mc, cfg, DEFAULT_CONDITION_LIMIT)
}

pub fn bel_gradient_with_limit(
    sys: &CoefficientSystem,
    x: &[f64],
    v: &[f64],
    f: &Payoff,
    t: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
    cond_limit: f64,
) -> Result<EstimateReport> {
    check_point(sys, x)?;
    check_point(sys, v)?;
    f.validate(sys.dim())?;
    mc.validate()?;
    if !(t > 0.0) {
        return Err(FlowError::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let cfg = cfg.with_horizon(t);
    cfg.validate()?;
    let n = cfg.n_steps();
    let (d, m) = (sys.dim(), sys.noise_dim());
    let t_grid = n as f64 * cfg.h;
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, cfg.h, m);
        let mut ws = Workspace::new(sys);
        let mut rinv = RightInverse::new(d, m, cond_limit);
        let mut y = vec![0.0; m];
        let mut weight = 0.0;
        let res = integrate_with(sys, x, v, &path, &cfg, Coupling::Coupled, &mut ws, |s| {
            rinv.apply(s.values, s.x, s.v, &mut y)?;
            weight += dot(&y, s.dw);
            Ok(())
        });
        match res {
            Ok(out) if out.exploded() => PathResult::Exited,
            Ok(out) => PathResult::Done {
                value: f.eval(&out.x) * weight / t_grid,
                clamped: out.clamped,
            },
            Err(e) => PathResult::Failed(e),
        }
    });
    let (values, tally) = collect(results);
    Ok(
        EstimateReport::from_values("bel_gradient", sys.label(), t, cfg.h, mc.n_paths, mc.master_seed, &values, tally)
            .with_note(format!("f={}", f.name())),
    )
}

/// Central difference `(P_t f(x + delta v) - P_t f(x - delta v)) / (2 delta)`
/// with both endpoints driven by the same increments per path.
pub fn fd_gradient(
    sys: &CoefficientSystem,
    x: &[f64],
    v: &[f64],
    f: &Payoff,
    t: f64,
    delta: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<EstimateReport> {
    check_point(sys, x)?;
    check_point(sys, v)?;
    f.validate(sys.dim())?;
    mc.validate()?;
    if !(delta > 0.0) {
        return Err(FlowError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let cfg = cfg.with_horizon(t);
    cfg.validate()?;
    let n = cfg.n_steps();
    let m = sys.noise_dim();
    let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + delta * b).collect();
    let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - delta * b).collect();
    let v0 = vec![0.0; sys.dim()];
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, cfg.h, m);
        let mut ws = Workspace::new(sys);
        let plus = integrate_with(sys, &xp, &v0, &path, &cfg, Coupling::StateOnly, &mut ws, |_| Ok(()));
        let minus = integrate_with(sys, &xm, &v0, &path, &cfg, Coupling::StateOnly, &mut ws, |_| Ok(()));
        match (plus, minus) {
            (Err(e), _) | (_, Err(e)) => PathResult::Failed(e),
            (Ok(a), Ok(b)) if a.exploded() || b.exploded() => PathResult::Exited,
            (Ok(a), Ok(b)) => PathResult::Done {
                value: (f.eval(&a.x) - f.eval(&b.x)) / (2.0 * delta),
                clamped: a.clamped + b.clamped,
            },
        }
    });
    let (values, tally) = collect(results);
    Ok(
        EstimateReport::from_values("fd_gradient", sys.label(), t, cfg.h, mc.n_paths, mc.master_seed, &values, tally)
            .with_note(format!("f={}", f.name()))
            .with_note(format!("delta={delta}")),
    )
}
