use serde::Serialize;

use super::report::{collect, run_paths, sample_stats, EstimateReport, McConfig, PathResult, PathTally};
use crate::coefficients::{theta_g, CoefficientSystem, KappaRule, ThetaBound, ThetaSearch};
use crate::engine::{integrate_with, sample_path, Coupling, IntegratorConfig, Workspace};
use crate::error::{FlowError, Result};
use crate::linalg::{dot, norm};

/// Horizon `T0(p) = kappa(p) / (d + 2)` on which derivative moments of
/// order `p` are claimed bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentWindow {
    pub p: f64,
    pub t0: f64,
    pub source: KappaRule,
}

impl MomentWindow {
    pub fn for_system(sys: &CoefficientSystem, p: f64) -> Self {
        let c = sys.constants();
        Self {
            p,
            t0: c.kappa(p) / (sys.dim() as f64 + 2.0),
            source: c.kappa,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t <= self.t0
    }
}

pub(crate) fn check_point(sys: &CoefficientSystem, x: &[f64]) -> Result<()> {
    if x.len() != sys.dim() {
        return Err(FlowError::Dimension {
            expected: sys.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Mean of `|V_t(x, v)|^p`.
pub fn derivative_moment(
    sys: &CoefficientSystem,
    x: &[f64],
    v: &[f64],
    p: f64,
    t: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<EstimateReport> {
    check_point(sys, x)?;
    check_point(sys, v)?;
    mc.validate()?;
    let cfg = cfg.with_horizon(t);
    cfg.validate()?;
    let n = cfg.n_steps();
    let m = sys.noise_dim();
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, cfg.h, m);
        let mut ws = Workspace::new(sys);
        match integrate_with(sys, x, v, &path, &cfg, Coupling::Coupled, &mut ws, |_| Ok(())) {
            Ok(out) if out.exploded() => PathResult::Exited,
            Ok(out) => PathResult::Done {
                value: norm(&out.v).powf(p),
                clamped: out.clamped,
            },
            Err(e) => PathResult::Failed(e),
        }
    });
    let (values, tally) = collect(results);
    let mut report =
        EstimateReport::from_values("derivative_moment", sys.label(), t, cfg.h, mc.n_paths, mc.master_seed, &values, tally);
    if !MomentWindow::for_system(sys, p).contains(t) {
        report = report.with_note("outside_window");
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentBoundRow {
    pub t: f64,
    pub lhs: f64,
    pub std_error: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentBoundCheck {
    pub lambda: f64,
    pub theta: ThetaBound,
    pub rows: Vec<MomentBoundRow>,
    pub tally: PathTally,
    pub n_paths: usize,
}

impl MomentBoundCheck {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_reports(&self, system: &str, h: f64, master_seed: u64) -> Vec<EstimateReport> {
        self.rows
            .iter()
            .map(|r| {
                let mut rep = EstimateReport {
                    estimator: "flow_moment".into(),
                    system: system.into(),
                    t: r.t,
                    value: r.lhs,
                    std_error: r.std_error,
                    n_paths: self.n_paths,
                    h,
                    master_seed,
                    tally: self.tally.clone(),
                    unreliable: self.tally.unreliable(self.n_paths),
                    notes: vec![format!("rhs={}", r.rhs), format!("theta={}", self.theta.value)],
                };
                rep.notes.push(if r.pass { "bound_holds".into() } else { "bound_violated".into() });
                rep
            })
            .collect()
    }
}

/// Compares `E (1 + |F_t(x)|^2)^lambda` with
/// `(1 + |x|^2)^lambda exp(lambda Theta t)` at `checkpoints` equally spaced
/// times in `(0, horizon]`, allowing three standard errors of slack.
pub fn flow_moment_bound_check(
    sys: &CoefficientSystem,
    x: &[f64],
    lambda: f64,
    horizon: f64,
    checkpoints: usize,
    mc: &McConfig,
    cfg: &IntegratorConfig,
    search: &ThetaSearch,
) -> Result<MomentBoundCheck> {
    check_point(sys, x)?;
    mc.validate()?;
    if checkpoints == 0 {
        return Err(FlowError::InvalidArgument("need at least one checkpoint".into()));
    }
    let theta = theta_g(sys, lambda, search)?;
    let cfg = cfg.with_horizon(horizon);
    cfg.validate()?;
    let n = cfg.n_steps();
    let m = sys.noise_dim();
    let steps: Vec<usize> = (1..=checkpoints)
        .map(|j| ((j as f64) * n as f64 / checkpoints as f64).round() as usize)
        .collect();
    let lyap = |y: &[f64]| (1.0 + dot(y, y)).powf(lambda);
    let v0 = vec![0.0; sys.dim()];
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, cfg.h, m);
        let mut ws = Workspace::new(sys);
        let mut rec = Vec::with_capacity(checkpoints);
        let mut next = 0;
        let res = integrate_with(sys, x, &v0, &path, &cfg, Coupling::StateOnly, &mut ws, |s| {
            while next < steps.len() && steps[next] == s.step {
                rec.push(lyap(s.x));
                next += 1;
            }
            Ok(())
        });
        match res {
            Ok(out) if out.exploded() => PathResult::Exited,
            Ok(out) => {
                while rec.len() < steps.len() {
                    rec.push(lyap(&out.x));
                }
                PathResult::Done {
                    value: rec,
                    clamped: out.clamped,
                }
            }
            Err(e) => PathResult::Failed(e),
        }
    });
    let (values, tally) = collect(results);
    let start = lyap(x);
    let mut rows = Vec::with_capacity(checkpoints);
    let mut column = Vec::with_capacity(values.len());
    for (j, &s) in steps.iter().enumerate() {
        column.clear();
        column.extend(values.iter().map(|r| r[j]));
        let (lhs, se) = sample_stats(&column);
        let t = s as f64 * cfg.h;
        let rhs = start * (lambda * theta.value * t).exp();
        rows.push(MomentBoundRow {
            t,
            lhs,
            std_error: se,
            rhs,
            pass: lhs <= rhs + 3.0 * se,
        });
    }
    Ok(MomentBoundCheck {
        lambda,
        theta,
        rows,
        tally,
        n_paths: mc.n_paths,
    })
}
