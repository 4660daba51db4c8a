use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::moments::check_point;
use super::report::{collect, run_paths, sample_stats, EstimateReport, McConfig, PathResult, PathTally};
use crate::coefficients::spectral::diffusion_from_values;
use crate::coefficients::CoefficientSystem;
use crate::engine::{integrate_with, sample_path, Coupling, IntegratorConfig, Workspace};
use crate::error::{FlowError, Result};
use crate::linalg::norm;
use crate::quadrature::unit_ball_volume;

/// Non-negative integrands on the cylinder `[0, T] x B_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CylinderFunction {
    Zero,
    One,
}

impl CylinderFunction {
    fn value(&self) -> f64 {
        match self {
            CylinderFunction::Zero => 0.0,
            CylinderFunction::One => 1.0,
        }
    }

    /// `L^q` norm on `[0, T] x B_R` in dimension `d`.
    pub fn lq_norm(&self, d: usize, horizon: f64, radius: f64, q: f64) -> f64 {
        match self {
            CylinderFunction::Zero => 0.0,
            CylinderFunction::One => (horizon * unit_ball_volume(d) * radius.powi(d as i32)).powf(1.0 / q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovSpec {
    /// radius `R` of the exit ball around the start point
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// constant `C(d)` multiplying the right-hand side
    #[serde(default = "default_c_d")]
    pub c_d: f64,
    #[serde(default = "default_f")]
    pub f: CylinderFunction,
}

fn default_radius() -> f64 {
    1.0
}
fn default_c_d() -> f64 {
    1.0
}
fn default_f() -> CylinderFunction {
    CylinderFunction::One
}

impl Default for KrylovSpec {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            c_d: default_c_d(),
            f: default_f(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KrylovReport {
    /// `E int_0^{T ^ tau_R} f det(A(F_t))^{1/(d+1)} dt`
    pub lhs: f64,
    pub lhs_std_error: f64,
    /// `E int tr A(F_t) dt`
    pub a_hat: f64,
    /// `E int |X_0(F_t)| dt`
    pub b_hat: f64,
    pub f_norm: f64,
    /// `C(d) e^T (A + B^2)^{d / (2(d+1))} |f|_{L^{d+1}}`
    pub rhs: f64,
    /// `rhs / C(d)`
    pub rhs_shape: f64,
    /// `lhs / (rhs / C(d))`
    pub ratio: f64,
    pub tally: PathTally,
    pub n_paths: usize,
    pub t: f64,
    pub h: f64,
}

impl KrylovReport {
    pub fn to_report(&self, system: &str, master_seed: u64) -> EstimateReport {
        let shape = self.rhs_shape;
        EstimateReport {
            estimator: "krylov_ratio".into(),
            system: system.into(),
            t: self.t,
            value: self.ratio,
            std_error: if shape > 0.0 { self.lhs_std_error / shape } else { f64::NAN },
            n_paths: self.n_paths,
            h: self.h,
            master_seed,
            tally: self.tally.clone(),
            unreliable: self.tally.unreliable(self.n_paths),
            notes: vec![
                format!("lhs={}", self.lhs),
                format!("rhs={}", self.rhs),
                format!("a_hat={}", self.a_hat),
                format!("b_hat={}", self.b_hat),
            ],
        }
    }
}

fn determinant(a: &[f64], d: usize) -> f64 {
    match d {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => DMatrix::from_row_slice(d, d, a).determinant(),
    }
}

/// Occupation-type estimate stopped at the exit of `F_t - x` from `B_R`,
/// against the shape of its upper bound.
pub fn krylov_check(
    sys: &CoefficientSystem,
    x: &[f64],
    spec: &KrylovSpec,
    horizon: f64,
    mc: &McConfig,
    cfg: &IntegratorConfig,
) -> Result<KrylovReport> {
    check_point(sys, x)?;
    mc.validate()?;
    if !(spec.radius > 0.0) {
        return Err(FlowError::InvalidArgument("radius must be positive".into()));
    }
    let cfg = cfg.with_horizon(horizon);
    cfg.validate()?;
    let n = cfg.n_steps();
    let (d, m) = (sys.dim(), sys.noise_dim());
    let q = d as f64 + 1.0;
    let fval = spec.f.value();
    let h = cfg.h;
    let v0 = vec![0.0; d];
    let results = run_paths(mc.n_paths, mc.workers, |i| {
        let path = sample_path(mc.master_seed, i, n, h, m);
        let mut ws = Workspace::new(sys);
        let mut a = vec![0.0; d * d];
        let (mut lhs, mut tr, mut drift) = (0.0, 0.0, 0.0);
        let mut inside = true;
        let res = integrate_with(sys, x, &v0, &path, &cfg, Coupling::StateOnly, &mut ws, |s| {
            if inside {
                let r = s.x.iter().zip(x).map(|(u, w)| (u - w) * (u - w)).sum::<f64>().sqrt();
                inside = r <= spec.radius;
            }
            if inside {
                diffusion_from_values(s.values, d, m, &mut a);
                let det = determinant(&a, d).max(0.0);
                lhs += fval * det.powf(1.0 / q) * h;
                tr += (0..d).map(|j| a[j * d + j]).sum::<f64>() * h;
                drift += norm(&s.values[..d]) * h;
            }
            Ok(())
        });
        match res {
            Ok(out) if out.exploded() => PathResult::Exited,
            Ok(out) => PathResult::Done {
                value: [lhs, tr, drift],
                clamped: out.clamped,
            },
            Err(e) => PathResult::Failed(e),
        }
    });
    let (values, tally) = collect(results);
    let (lhs, lhs_se) = sample_stats(&values.iter().map(|v| v[0]).collect::<Vec<_>>());
    let (a_hat, _) = sample_stats(&values.iter().map(|v| v[1]).collect::<Vec<_>>());
    let (b_hat, _) = sample_stats(&values.iter().map(|v| v[2]).collect::<Vec<_>>());
    let t = n as f64 * h;
    let f_norm = spec.f.lq_norm(d, t, spec.radius, q);
    let shape = t.exp() * (a_hat + b_hat * b_hat).powf(d as f64 / (2.0 * q)) * f_norm;
    let ratio = if shape > 0.0 { lhs / shape } else { 0.0 };
    Ok(KrylovReport {
        lhs,
        lhs_std_error: lhs_se,
        a_hat,
        b_hat,
        f_norm,
        rhs: spec.c_d * shape,
        rhs_shape: shape,
        ratio,
        tally,
        n_paths: mc.n_paths,
        t,
        h,
    })
}
