use serde::Serialize;

use super::moments::check_point;
use super::report::{collect, run_paths, sample_stats, EstimateReport, McConfig, PathResult, PathTally};
use crate::approximation::MollifiedFamily;
use crate::coefficients::CoefficientSystem;
use crate::engine::{integrate, integrate_with, sample_path, Coupling, IntegratorConfig, Workspace};
use crate::error::{FlowError, Result};
use crate::linalg::norm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub eps_ref: f64,
    /// `E sup_t |F^eps - F^eps_ref|`
    pub gap_x: f64,
    pub se_x: f64,
    /// `E sup_t |V^eps - V^eps_ref|`
    pub gap_v: f64,
    pub se_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub eps_list: Vec<f64>,
    /// pairs `(eps_i, eps_{i+1})`
    pub consecutive: Vec<ConvergenceRow>,
    /// pairs `(eps_i, eps_finest)`
    pub to_finest: Vec<ConvergenceRow>,
    pub tally: PathTally,
    pub n_paths: usize,
    pub t: f64,
    pub h: f64,
}

fn non_increasing(rows: &[ConvergenceRow], k: f64, pick: impl Fn(&ConvergenceRow) -> (f64, f64)) -> bool {
    rows.windows(2).all(|w| {
        let (a, sa) = pick(&w[0]);
        let (b, sb) = pick(&w[1]);
        b <= a + k * (sa * sa + sb * sb).sqrt()
    })
}

impl ConvergenceTable {
    /// Consecutive gaps never grow by more than `k` combined standard errors.
    pub fn consecutive_monotone(&self, k: f64) -> bool {
        non_increasing(&self.consecutive, k, |r| (r.gap_x, r.se_x))
            && non_increasing(&self.consecutive, k, |r| (r.gap_v, r.se_v))
    }

    /// Gaps to the finest member never grow as `eps` decreases by more
    /// than `k` combined standard errors.
    pub fn finest_monotone(&self, k: f64) -> bool {
        non_increasing(&self.to_finest, k, |r| (r.gap_x, r.se_x))
            && non_increasing(&self.to_finest, k, |r| (r.gap_v, r.se_v))
    }

    pub fn to_reports(&self, system: &str, master_seed: u64) -> Vec<EstimateReport> {
        let mut out = Vec::new();
        for (kind, rows) in [("consecutive", &self.consecutive), ("finest", &self.to_finest)] {
            for r in rows {
                for (what, value, se) in [("x", r.gap_x, r.se_x), ("v", r.gap_v, r.se_v)] {
                    out.push(EstimateReport {
                        estimator: format!("family_convergence.{what}"),
                        system: system.into(),
                        t: self.t,
                        value,
                        std_error: se,
                        n_paths: self.n_paths,
                        h: self.h,
                        master_seed,
                        tally: self.tally.clone(),
                        unreliable: self.tally.unreliable(self.n_paths),
                        notes: vec![format!("pair={kind}"), format!("eps={}", r.eps), format!("eps_ref={}", r.eps_ref)],
                    });
                }
            }
        }
        out
    }
}

fn sup_gap(a: &[f64], b: &[f64], d: usize) -> f64 {
    a.chunks(d)
        .zip(b.chunks(d))
        .map(|(p, q)| p.iter().zip(q).map(|(u, w)| (u - w) * (u - w)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Simulates every member of the family with common noise and tabulates
/// the mean grid-sup distances between members.
pub fn family_convergence(
    fam: &MollifiedFamily,
    eps_list: &[f64],
    x: &[f64],
    v: &[f64],
    horizon: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<ConvergenceTable> {
    let base = fam.base();
    check_point(base, x)?;
    check_point(base, v)?;
    mc.validate()?;
    if eps_list.len() < 2 {
        return Err(FlowError::InvalidArgument("need at least two eps values".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(FlowError::InvalidArgument("eps_list must be strictly decreasing".into()));
    }
    let members: Vec<CoefficientSystem> = eps_list.iter().map(|&e| fam.member(e)).collect::<Result<_>>()?;
    let cfg = cfg.with_horizon(horizon);
    cfg.validate()?;
    let n = cfg.n_steps();
    let (d, m) = (base.dim(), base.noise_dim());
    let k = members.len();
    let finest = k - 1;
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, cfg.h, m);
        let mut trajs = Vec::with_capacity(k);
        let mut clamped = 0;
        for sys in &members {
            match integrate(sys, x, v, &path, &cfg) {
                Ok(tr) if tr.exploded() => return PathResult::Exited,
                Ok(tr) => {
                    clamped += tr.clamped;
                    trajs.push(tr);
                }
                Err(e) => return PathResult::Failed(e),
            }
        }
        let mut gaps = Vec::with_capacity(4 * (k - 1));
        for j in 0..k - 1 {
            for r in [j + 1, finest] {
                gaps.push(sup_gap(&trajs[j].xs, &trajs[r].xs, d));
                gaps.push(sup_gap(&trajs[j].vs, &trajs[r].vs, d));
            }
        }
        PathResult::Done { value: gaps, clamped }
    });
    let (values, tally) = collect(results);
    let column = |c: usize| sample_stats(&values.iter().map(|g| g[c]).collect::<Vec<_>>());
    let mut consecutive = Vec::new();
    let mut to_finest = Vec::new();
    for j in 0..k - 1 {
        let (gx, sx) = column(4 * j);
        let (gv, sv) = column(4 * j + 1);
        consecutive.push(ConvergenceRow {
            eps: eps_list[j],
            eps_ref: eps_list[j + 1],
            gap_x: gx,
            se_x: sx,
            gap_v: gv,
            se_v: sv,
        });
        let (gx, sx) = column(4 * j + 2);
        let (gv, sv) = column(4 * j + 3);
        to_finest.push(ConvergenceRow {
            eps: eps_list[j],
            eps_ref: eps_list[finest],
            gap_x: gx,
            se_x: sx,
            gap_v: gv,
            se_v: sv,
        });
    }
    Ok(ConvergenceTable {
        eps_list: eps_list.to_vec(),
        consecutive,
        to_finest,
        tally,
        n_paths: mc.n_paths,
        t: n as f64 * cfg.h,
        h: cfg.h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub distance: f64,
    /// `E |F_t(x) - F_t(y)|^p / |x - y|^p`
    pub ratio: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderTable {
    pub p: f64,
    pub t: f64,
    pub rows: Vec<HolderRow>,
    pub tally: PathTally,
    pub n_paths: usize,
}

/// Common-noise `p`-th moment of the normalised flow increment for each pair.
pub fn holder_modulus(
    sys: &CoefficientSystem,
    pairs: &[(Vec<f64>, Vec<f64>)],
    p: f64,
    t: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<HolderTable> {
    mc.validate()?;
    for (a, b) in pairs {
        check_point(sys, a)?;
        check_point(sys, b)?;
        if a == b {
            return Err(FlowError::InvalidArgument("pair points must differ".into()));
        }
    }
    let cfg = cfg.with_horizon(t);
    cfg.validate()?;
    let n = cfg.n_steps();
    let m = sys.noise_dim();
    let v0 = vec![0.0; sys.dim()];
    let dist: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| norm(&a.iter().zip(b).map(|(u, w)| u - w).collect::<Vec<_>>()))
        .collect();
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, cfg.h, m);
        let mut ws = Workspace::new(sys);
        let mut out = Vec::with_capacity(pairs.len());
        let mut clamped = 0;
        for ((a, b), r) in pairs.iter().zip(&dist) {
            let fa = integrate_with(sys, a, &v0, &path, &cfg, Coupling::StateOnly, &mut ws, |_| Ok(()));
            let fb = integrate_with(sys, b, &v0, &path, &cfg, Coupling::StateOnly, &mut ws, |_| Ok(()));
            match (fa, fb) {
                (Err(e), _) | (_, Err(e)) => return PathResult::Failed(e),
                (Ok(u), Ok(w)) if u.exploded() || w.exploded() => return PathResult::Exited,
                (Ok(u), Ok(w)) => {
                    clamped += u.clamped + w.clamped;
                    let diff: Vec<f64> = u.x.iter().zip(&w.x).map(|(s, q)| s - q).collect();
                    out.push((norm(&diff) / r).powf(p));
                }
            }
        }
        PathResult::Done { value: out, clamped }
    });
    let (values, tally) = collect(results);
    let rows = pairs
        .iter()
        .zip(&dist)
        .enumerate()
        .map(|(j, ((a, b), r))| {
            let (ratio, se) = sample_stats(&values.iter().map(|v| v[j]).collect::<Vec<_>>());
            HolderRow {
                x: a.clone(),
                y: b.clone(),
                distance: *r,
                ratio,
                std_error: se,
            }
        })
        .collect();
    Ok(HolderTable {
        p,
        t: n as f64 * cfg.h,
        rows,
        tally,
        n_paths: mc.n_paths,
    })
}
