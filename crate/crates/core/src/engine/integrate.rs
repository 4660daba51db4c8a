//! Euler–Maruyama for the coupled state / derivative system
//!
//! ```text
//! x+ = x + sum_k X_k(x) dW^k + X_0(x) h
//! v+ = v + sum_k DX_k(x) v dW^k + DX_0(x) v h
//! ```
//!
//! with all coefficients taken at the pre-step state.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::rng::BrownianPath;
use crate::coefficients::CoefficientSystem;
use crate::error::{FlowError, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_guard")]
    pub guard_radius: f64,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_h() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    1.0
}
fn default_guard() -> f64 {
    1e6
}
fn default_r_min() -> f64 {
    1e-6
}
fn default_scheme() -> Scheme {
    Scheme::EulerMaruyama
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: default_h(),
            horizon: default_horizon(),
            guard_radius: default_guard(),
            r_min: default_r_min(),
            scheme: Scheme::EulerMaruyama,
        }
    }
}

impl IntegratorConfig {
    pub fn new(h: f64, horizon: f64) -> Self {
        Self {
            h,
            horizon,
            ..Self::default()
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.h).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.horizon >= self.h * (1.0 - 1e-9)) || !(self.guard_radius > 0.0) || !(self.r_min >= 0.0) {
            return Err(FlowError::InvalidArgument(format!(
                "integrator config needs h > 0, T >= h, guard_radius > 0 (h={}, T={}, guard={})",
                self.h, self.horizon, self.guard_radius
            )));
        }
        Ok(())
    }
}

/// What the integrator advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `x` only; Jacobians are never evaluated.
    StateOnly,
    /// `(x, v)`.
    Coupled,
}

/// Pre-step view handed to observers.
#[derive(Debug)]
pub struct StepState<'a> {
    pub step: usize,
    pub t: f64,
    pub x: &'a [f64],
    pub v: &'a [f64],
    /// `X_0 .. X_m` at `x`
    pub values: &'a [f64],
    /// `DX_0 .. DX_m` at `x` (or at the clamp point); zeros in state-only mode
    pub jacobians: &'a [f64],
    pub dw: &'a [f64],
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub steps_taken: usize,
    /// First step index whose result left the guard ball.
    pub exit_step: Option<usize>,
    pub clamped: usize,
}

impl PathOutcome {
    pub fn exploded(&self) -> bool {
        self.exit_step.is_some()
    }
}

/// Reusable per-path buffers.
#[derive(Debug, Clone)]
pub struct Workspace {
    values: Vec<f64>,
    jac: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    xn: Vec<f64>,
    vn: Vec<f64>,
}

impl Workspace {
    pub fn new(sys: &CoefficientSystem) -> Self {
        let d = sys.dim();
        Self {
            values: vec![0.0; sys.values_len()],
            jac: vec![0.0; sys.jacobians_len()],
            x: vec![0.0; d],
            v: vec![0.0; d],
            xn: vec![0.0; d],
            vn: vec![0.0; d],
        }
    }
}

fn check_inputs(sys: &CoefficientSystem, x0: &[f64], v0: &[f64], path: &BrownianPath, cfg: &IntegratorConfig) -> Result<usize> {
    cfg.validate()?;
    let d = sys.dim();
    if x0.len() != d {
        return Err(FlowError::Dimension {
            expected: d,
            got: x0.len(),
        });
    }
    if v0.len() != d {
        return Err(FlowError::Dimension {
            expected: d,
            got: v0.len(),
        });
    }
    if path.m != sys.noise_dim() {
        return Err(FlowError::Dimension {
            expected: sys.noise_dim(),
            got: path.m,
        });
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(FlowError::InvalidArgument("x0 must be finite".into()));
    }
    let n = cfg.n_steps();
    if path.n_steps < n || (path.h - cfg.h).abs() > 1e-12 * cfg.h {
        return Err(FlowError::InvalidArgument(format!(
            "path has {} steps of {}, integrator needs {n} steps of {}",
            path.n_steps, path.h, cfg.h
        )));
    }
    Ok(n)
}

/// Jacobians at `x`, moving to the clamp sphere inside a declared singular
/// set. Returns whether the clamp engaged.
pub fn jacobians_with_clamp(sys: &CoefficientSystem, x: &[f64], r_min: f64, out: &mut [f64], step: usize) -> Result<bool> {
    let clamp_radius = match sys.origin_policy().r_min() {
        Some(r) => r.max(r_min),
        None => 0.0,
    };
    let r = norm(x);
    let res = if clamp_radius > 0.0 && r < clamp_radius {
        let c: Vec<f64> = if r == 0.0 {
            let mut e = vec![0.0; x.len()];
            e[0] = clamp_radius;
            e
        } else {
            x.iter().map(|v| v * clamp_radius / r).collect()
        };
        sys.jacobians_into(&c, out).map(|_| true)
    } else {
        sys.jacobians_into(x, out).map(|_| false)
    };
    res.map_err(|e| FlowError::Integration {
        step,
        point: x.to_vec(),
        reason: e.to_string(),
    })
}

/// Core loop. `observe` sees every pre-step state; returning an error aborts
/// the path.
pub fn integrate_with<F>(
    sys: &CoefficientSystem,
    x0: &[f64],
    v0: &[f64],
    path: &BrownianPath,
    cfg: &IntegratorConfig,
    coupling: Coupling,
    ws: &mut Workspace,
    mut observe: F,
) -> Result<PathOutcome>
where
    F: FnMut(&StepState<'_>) -> Result<()>,
{
    let n = check_inputs(sys, x0, v0, path, cfg)?;
    let (d, m) = (sys.dim(), sys.noise_dim());
    let dd = d * d;
    let h = cfg.h;
    ws.x.copy_from_slice(x0);
    ws.v.copy_from_slice(v0);
    if coupling == Coupling::StateOnly {
        ws.jac.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut clamped = 0usize;
    let mut exit_step = None;
    let mut steps_taken = 0;
    for step in 0..n {
        sys.values_into(&ws.x, &mut ws.values)
            .map_err(|e| FlowError::Integration {
                step,
                point: ws.x.clone(),
                reason: e.to_string(),
            })?;
        let was_clamped = match coupling {
            Coupling::Coupled => jacobians_with_clamp(sys, &ws.x, cfg.r_min, &mut ws.jac, step)?,
            Coupling::StateOnly => false,
        };
        if was_clamped {
            clamped += 1;
        }
        let dw = path.increment(step);
        observe(&StepState {
            step,
            t: step as f64 * h,
            x: &ws.x,
            v: &ws.v,
            values: &ws.values,
            jacobians: &ws.jac,
            dw,
            clamped: was_clamped,
        })?;

        for i in 0..d {
            let mut acc = ws.values[i] * h;
            for k in 1..=m {
                acc += ws.values[k * d + i] * dw[k - 1];
            }
            ws.xn[i] = ws.x[i] + acc;
        }
        if coupling == Coupling::Coupled {
            for i in 0..d {
                let mut acc = dot(&ws.jac[i * d..(i + 1) * d], &ws.v) * h;
                for k in 1..=m {
                    acc += dot(&ws.jac[k * dd + i * d..k * dd + (i + 1) * d], &ws.v) * dw[k - 1];
                }
                ws.vn[i] = ws.v[i] + acc;
            }
        }
        if !ws.xn.iter().chain(ws.vn.iter()).all(|v| v.is_finite()) {
            return Err(FlowError::Integration {
                step,
                point: ws.x.clone(),
                reason: "non-finite state after update".into(),
            });
        }
        std::mem::swap(&mut ws.x, &mut ws.xn);
        if coupling == Coupling::Coupled {
            std::mem::swap(&mut ws.v, &mut ws.vn);
        }
        steps_taken = step + 1;
        if norm(&ws.x) > cfg.guard_radius {
            exit_step = Some(step + 1);
            break;
        }
    }
    Ok(PathOutcome {
        x: ws.x.clone(),
        v: ws.v.clone(),
        steps_taken,
        exit_step,
        clamped,
    })
}

/// Discrete record of the coupled state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub d: usize,
    pub times: Vec<f64>,
    /// flat, `d` per state
    pub xs: Vec<f64>,
    pub vs: Vec<f64>,
    /// per recorded state: whether the step taken from it used the clamp
    pub clamp_flags: Vec<bool>,
    pub exit_step: Option<usize>,
    pub clamped: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn exploded(&self) -> bool {
        self.exit_step.is_some()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.vs[i * self.d..(i + 1) * self.d]
    }

    pub fn final_x(&self) -> &[f64] {
        self.x(self.len() - 1)
    }

    pub fn final_v(&self) -> &[f64] {
        self.v(self.len() - 1)
    }

    /// CSV dump `t,x1..xd,v1..vd,exploded,clamped` every `stride` states
    /// (the last state is always written). `clamped` is cumulative.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        let stride = stride.max(1);
        let mut header = String::from("t");
        for i in 1..=self.d {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=self.d {
            header.push_str(&format!(",v{i}"));
        }
        header.push_str(",exploded,clamped");
        writeln!(w, "{header}")?;
        let mut cumulative = 0usize;
        let last = self.len() - 1;
        for i in 0..self.len() {
            let mut row = format!("{}", self.times[i]);
            for v in self.x(i) {
                row.push_str(&format!(",{v}"));
            }
            for v in self.v(i) {
                row.push_str(&format!(",{v}"));
            }
            let exploded = self.exploded() && i == last;
            if i % stride == 0 || i == last {
                writeln!(w, "{row},{},{cumulative}", u8::from(exploded))?;
            }
            if self.clamp_flags.get(i).copied().unwrap_or(false) {
                cumulative += 1;
            }
        }
        Ok(())
    }
}

/// Integrates one path and records every state.
pub fn integrate(sys: &CoefficientSystem, x0: &[f64], v0: &[f64], path: &BrownianPath, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let d = sys.dim();
    let mut ws = Workspace::new(sys);
    let n = cfg.n_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity((n + 1) * d);
    let mut vs = Vec::with_capacity((n + 1) * d);
    let mut clamp_flags = Vec::with_capacity(n + 1);
    let out = integrate_with(sys, x0, v0, path, cfg, Coupling::Coupled, &mut ws, |s| {
        times.push(s.t);
        xs.extend_from_slice(s.x);
        vs.extend_from_slice(s.v);
        clamp_flags.push(s.clamped);
        Ok(())
    })?;
    times.push(out.steps_taken as f64 * cfg.h);
    xs.extend_from_slice(&out.x);
    vs.extend_from_slice(&out.v);
    clamp_flags.push(false);
    Ok(Trajectory {
        d,
        times,
        xs,
        vs,
        clamp_flags,
        exit_step: out.exit_step,
        clamped: out.clamped,
    })
}

/// Integrates every start point against the same increments.
pub fn multi_start(sys: &CoefficientSystem, x0_list: &[Vec<f64>], v0: &[f64], path: &BrownianPath, cfg: &IntegratorConfig) -> Result<Vec<Trajectory>> {
    x0_list.iter().map(|x0| integrate(sys, x0, v0, path, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialCheck {
    /// `|v_T|^p` from the trajectory
    pub direct: f64,
    /// `|v_0|^p exp(M - <M>/2 + a)` from the accumulated functionals
    pub reconstructed: f64,
    pub martingale: f64,
    pub quadratic_variation: f64,
    pub drift: f64,
}

impl ExponentialCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.direct - self.reconstructed).abs() / self.direct.abs().max(f64::MIN_POSITIVE)
    }
}

/// Accumulates the log-exponential representation of `|v_t|^p` along a
/// recorded trajectory:
///
/// * `M += p sum_k <DX_k v, v> / |v|^2 dW^k`
/// * `<M> += sum_k (p <DX_k v, v> / |v|^2)^2 h`
/// * `a += p/2 Hbar_p(v, v) / |v|^2 h`, with
///   `Hbar_p(v, v) = 2 <DX_0 v, v> + sum_k (|DX_k v|^2 + (p - 2) <DX_k v, v>^2 / |v|^2)`.
pub fn log_exponential_check(sys: &CoefficientSystem, traj: &Trajectory, path: &BrownianPath, p: f64, cfg: &IntegratorConfig) -> Result<ExponentialCheck> {
    if traj.exploded() {
        return Err(FlowError::InvalidArgument("trajectory left the guard ball".into()));
    }
    let (d, m) = (sys.dim(), sys.noise_dim());
    let dd = d * d;
    let h = cfg.h;
    let mut jac = vec![0.0; sys.jacobians_len()];
    let mut jv = vec![0.0; d];
    let (mut mart, mut qv, mut drift) = (0.0, 0.0, 0.0);
    let steps = traj.len() - 1;
    for s in 0..steps {
        let x = traj.x(s);
        let v = traj.v(s);
        let v2 = dot(v, v);
        if v2 == 0.0 {
            return Err(FlowError::ZeroDerivative { step: s });
        }
        jacobians_with_clamp(sys, x, cfg.r_min, &mut jac, s)?;
        let dw = path.increment(s);
        crate::linalg::mat_vec(&jac[..dd], v, &mut jv);
        let mut hbar = 2.0 * dot(&jv, v);
        for k in 1..=m {
            crate::linalg::mat_vec(&jac[k * dd..(k + 1) * dd], v, &mut jv);
            let inner = dot(&jv, v);
            let integrand = p * inner / v2;
            mart += integrand * dw[k - 1];
            qv += integrand * integrand * h;
            hbar += dot(&jv, &jv) + (p - 2.0) * inner * inner / v2;
        }
        drift += 0.5 * p * hbar / v2 * h;
    }
    let v0 = norm(traj.v(0)).powf(p);
    Ok(ExponentialCheck {
        direct: norm(traj.final_v()).powf(p),
        reconstructed: v0 * (mart - 0.5 * qv + drift).exp(),
        martingale: mart,
        quadratic_variation: qv,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin::{self, IrregularParams};
    use crate::engine::rng::sample_path;

    #[test]
    fn additive_noise_is_exact() {
        let sys = builtin::constant(1, 0.7, 0.0);
        let cfg = IntegratorConfig::new(0.01, 1.0);
        let path = sample_path(3, 0, 100, 0.01, 1);
        let tr = integrate(&sys, &[0.5], &[2.0], &path, &cfg).unwrap();
        let mut w = 0.0;
        for i in 0..tr.len() {
            assert!((tr.x(i)[0] - (0.5 + 0.7 * w)).abs() < 1e-12);
            assert_eq!(tr.v(i), &[2.0]);
            if i < 100 {
                w += path.increment(i)[0];
            }
        }
        assert_eq!(tr.clamped, 0);
    }

    #[test]
    fn gbm_derivative_tracks_state() {
        let sys = builtin::geometric_bm(1, 0.1, 0.2);
        let cfg = IntegratorConfig::new(1e-3, 1.0);
        let path = sample_path(11, 4, 1000, 1e-3, 1);
        let (x0, v0) = (1.7, 0.3);
        let tr = integrate(&sys, &[x0], &[v0], &path, &cfg).unwrap();
        for i in 0..tr.len() {
            let a = tr.v(i)[0] / v0;
            let b = tr.x(i)[0] / x0;
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn ou_derivative_is_deterministic() {
        let sys = builtin::ornstein_uhlenbeck(1, 1.0, 1.0);
        let cfg = IntegratorConfig::new(1e-3, 1.0);
        let path = sample_path(1, 0, 1000, 1e-3, 1);
        let tr = integrate(&sys, &[0.2], &[1.0], &path, &cfg).unwrap();
        let vt = tr.final_v()[0];
        assert!((vt - 0.999f64.powi(1000)).abs() < 1e-12);
        assert!((vt - (-1f64).exp()).abs() < 2e-4);
    }

    #[test]
    fn explosion_is_flagged_and_truncates() {
        let sys = builtin::geometric_bm(1, 50.0, 0.0);
        let mut cfg = IntegratorConfig::new(0.1, 10.0);
        cfg.guard_radius = 100.0;
        let path = sample_path(1, 0, 100, 0.1, 1);
        let tr = integrate(&sys, &[1.0], &[1.0], &path, &cfg).unwrap();
        assert!(tr.exploded());
        assert!(tr.len() < 101);
        assert!(tr.final_x()[0] > 100.0);
    }

    #[test]
    fn origin_clamp_is_counted() {
        let sys = builtin::example21(&IrregularParams {
            d: 2,
            q1: 0.8,
            q2: 0.5,
            q3: 0.5,
            q4: 1.0,
            r_min: 1e-6,
        })
        .unwrap();
        let cfg = IntegratorConfig::new(0.01, 0.01);
        let path = sample_path(1, 0, 1, 0.01, 2);
        let tr = integrate(&sys, &[0.0, 0.0], &[1.0, 0.0], &path, &cfg).unwrap();
        assert_eq!(tr.clamped, 1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = builtin::ornstein_uhlenbeck(2, 1.0, 1.0);
        let cfg = IntegratorConfig::new(0.1, 1.0);
        let path = sample_path(1, 0, 10, 0.1, 1);
        assert!(integrate(&sys, &[0.0, 0.0], &[1.0, 0.0], &path, &cfg).is_err());
    }

    #[test]
    fn zero_jacobians_reconstruct_exactly() {
        let sys = builtin::additive_noise(2, 1.0);
        let cfg = IntegratorConfig::new(0.01, 0.5);
        let path = sample_path(2, 0, 50, 0.01, 2);
        let tr = integrate(&sys, &[0.0, 0.0], &[0.6, 0.8], &path, &cfg).unwrap();
        let c = log_exponential_check(&sys, &tr, &path, 3.0, &cfg).unwrap();
        assert_eq!(c.direct, c.reconstructed);
    }

    #[test]
    fn ou_exponential_representation() {
        let sys = builtin::ornstein_uhlenbeck(1, 1.0, 1.0);
        let cfg = IntegratorConfig::new(1e-3, 1.0);
        let path = sample_path(2, 0, 1000, 1e-3, 1);
        let tr = integrate(&sys, &[0.0], &[2.0], &path, &cfg).unwrap();
        let c = log_exponential_check(&sys, &tr, &path, 2.0, &cfg).unwrap();
        assert!((c.reconstructed - 4.0 * (-2f64).exp()).abs() < 1e-12);
        assert!((c.direct - 4.0 * 0.999f64.powi(2000)).abs() < 1e-12);
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let sys = builtin::constant(2, 0.0, 0.0);
        let cfg = IntegratorConfig::new(0.1, 1.0);
        let path = sample_path(1, 0, 10, 0.1, 2);
        let tr = integrate(&sys, &[1.0, 2.0], &[1.0, 0.0], &path, &cfg).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,v1,v2,exploded,clamped");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,1,2,1,0,0,0");
        assert!(lines[3].ends_with(",1,2,1,0,0,0"));
    }
}
