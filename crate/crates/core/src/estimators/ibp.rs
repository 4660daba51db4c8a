use serde::{Deserialize, Serialize};

use super::report::{collect, run_paths, McConfig, PathResult, PathTally};
use crate::coefficients::CoefficientSystem;
use crate::engine::{integrate_with, sample_path, Coupling, IntegratorConfig, Workspace};
use crate::error::{FlowError, Result};
use crate::grid::BoxGrid;

/// Cube `[lo, hi]^d` sampled with `points_per_axis` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpBox {
    pub lo: f64,
    pub hi: f64,
    pub points_per_axis: usize,
}

/// `phi(x) = exp(-1 / (1 - |u|^2))`, `u = (x - center) / radius`, zero
/// outside the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpFunction {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BumpFunction {
    pub fn centered(d: usize, radius: f64) -> Self {
        Self {
            center: vec![0.0; d],
            radius,
        }
    }

    fn reduced(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| ((a - c) / self.radius).powi(2))
            .sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.reduced(x);
        if s < 1.0 {
            (-1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    }

    pub fn partial(&self, x: &[f64], i: usize) -> f64 {
        let s = self.reduced(x);
        if s < 1.0 {
            let u = (x[i] - self.center[i]) / self.radius;
            let one_minus = 1.0 - s;
            (-1.0 / one_minus).exp() * (-2.0 * u / (one_minus * one_minus)) / self.radius
        } else {
            0.0
        }
    }

    fn inside(&self, grid: &IbpBox) -> bool {
        self.center
            .iter()
            .all(|&c| c - self.radius > grid.lo && c + self.radius < grid.hi)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IbpStats {
    pub mean: f64,
    pub max: f64,
    pub per_omega: Vec<f64>,
    pub tally: PathTally,
}

/// For each noise sample, `max_j |sum w d_i phi F_t^j + sum w phi V_t^j(e_i)|`
/// over the grid with trapezoid weights, all starts sharing one path.
pub fn ibp_residual(
    sys: &CoefficientSystem,
    t: f64,
    grid: &IbpBox,
    phi: &BumpFunction,
    i: usize,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<IbpStats> {
    let d = sys.dim();
    mc.validate()?;
    if i >= d || phi.center.len() != d {
        return Err(FlowError::Dimension {
            expected: d,
            got: phi.center.len().max(i + 1),
        });
    }
    if grid.points_per_axis < 3 || !(grid.hi > grid.lo) {
        return Err(FlowError::InvalidArgument("box needs hi > lo and at least 3 points per axis".into()));
    }
    if !(phi.radius > 0.0) || !phi.inside(grid) {
        return Err(FlowError::InvalidArgument("test function must be supported strictly inside the box".into()));
    }
    let cfg = cfg.with_horizon(t);
    cfg.validate()?;
    let n = cfg.n_steps();
    let m = sys.noise_dim();
    let bg = BoxGrid::new(d, grid.lo, grid.hi, grid.points_per_axis);
    let spacing = bg.spacing();
    let last = grid.points_per_axis - 1;

    // Only nodes where phi or its derivative is non-zero contribute.
    let mut nodes: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut x = vec![0.0; d];
    for idx in 0..bg.len() {
        bg.point(idx, &mut x);
        let (p, dp) = (phi.value(&x), phi.partial(&x, i));
        if p == 0.0 && dp == 0.0 {
            continue;
        }
        let mut w = spacing.powi(d as i32);
        let mut rem = idx;
        for _ in 0..d {
            let a = rem % grid.points_per_axis;
            rem /= grid.points_per_axis;
            if a == 0 || a == last {
                w *= 0.5;
            }
        }
        nodes.push((x.clone(), w * p, w * dp));
    }
    let mut e_i = vec![0.0; d];
    e_i[i] = 1.0;

    let results = run_paths(mc.n_paths, mc.workers, |w| {
        let path = sample_path(mc.master_seed, w, n, cfg.h, m);
        let mut ws = Workspace::new(sys);
        let mut acc = vec![0.0; d];
        let mut clamped = 0;
        for (x0, wp, wdp) in &nodes {
            match integrate_with(sys, x0, &e_i, &path, &cfg, Coupling::Coupled, &mut ws, |_| Ok(())) {
                Ok(out) if out.exploded() => return PathResult::Exited,
                Ok(out) => {
                    clamped += out.clamped;
                    for j in 0..d {
                        acc[j] += wdp * out.x[j] + wp * out.v[j];
                    }
                }
                Err(e) => return PathResult::Failed(e),
            }
        }
        PathResult::Done {
            value: acc.iter().fold(0.0f64, |a, b| a.max(b.abs())),
            clamped,
        }
    });
    let (per_omega, tally) = collect(results);
    let mean = per_omega.iter().sum::<f64>() / per_omega.len().max(1) as f64;
    let max = per_omega.iter().copied().fold(0.0, f64::max);
    Ok(IbpStats {
        mean,
        max,
        per_omega,
        tally,
    })
}
