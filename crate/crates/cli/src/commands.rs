//! Dispatch from a resolved config to the library.

use std::fmt::Write as _;

use clap::ValueEnum;
use flowlab::approximation::{BallResolution, MollifiedFamily};
use flowlab::coefficients::{check_assumptions, theta_g, ThetaSearch, Verdict};
use flowlab::engine::{integrate, sample_path};
use flowlab::estimators::{
    bel_gradient, derivative_moment, family_convergence, fd_gradient, flow_moment_bound_check, ibp_residual,
    krylov_check, EstimateReport, PathTally,
};
use flowlab::McConfig;

use crate::config::{GradientMethod, Resolved};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Check,
    Simulate,
    Gradient,
    Converge,
    Ibp,
    Krylov,
    Moments,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Gradient => "gradient",
            Command::Converge => "converge",
            Command::Ibp => "ibp",
            Command::Krylov => "krylov",
            Command::Moments => "moments",
        }
    }
}

/// Everything a command produces besides the shared artefacts.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub rows: Vec<EstimateReport>,
    /// Extra files `(name, contents)` written next to `result.csv`.
    pub files: Vec<(String, Vec<u8>)>,
    pub log: String,
}

impl CommandOutput {
    pub fn unreliable(&self) -> bool {
        self.rows.iter().any(|r| r.unreliable)
    }
}

fn diagnostic(estimator: &str, system: &str, t: f64, value: f64, h: f64, seed: u64, notes: Vec<String>) -> EstimateReport {
    EstimateReport {
        estimator: estimator.into(),
        system: system.into(),
        t,
        value,
        std_error: 0.0,
        n_paths: 0,
        h,
        master_seed: seed,
        tally: PathTally::default(),
        unreliable: false,
        notes,
    }
}

fn missing(block: &str) -> CliError {
    CliError::Validation(format!("{block}: block required by this command is missing"))
}

fn tally_line(label: &str, t: &PathTally, n_paths: usize) -> String {
    format!(
        "{label}: paths={n_paths} exits={} singular_diffusion={} integration_errors={} clamped_steps={}{}\n",
        t.exits,
        t.singular_diffusion,
        t.integration_errors,
        t.clamped_steps,
        t.first_error.as_ref().map(|e| format!(" first_error=\"{e}\"")).unwrap_or_default()
    )
}

pub fn execute(command: Command, resolved: &Resolved) -> Result<CommandOutput, CliError> {
    let cfg = &resolved.config;
    let sys = &resolved.system;
    let label = sys.label().to_string();
    let integ = cfg.integrator;
    let mc = &cfg.mc;
    let seed = mc.master_seed;
    let mut out = CommandOutput::default();
    match command {
        Command::Check => {
            let block = cfg.check.clone().unwrap_or_default();
            let report = check_assumptions(sys, &block.spec(sys.dim()));
            for c in &report.conditions {
                let verdict = match c.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "fail",
                    Verdict::NotEvaluated => "not_evaluated",
                };
                let mut notes = vec![format!("verdict={verdict}")];
                if c.skipped_points > 0 {
                    notes.push(format!("skipped={}", c.skipped_points));
                }
                out.rows
                    .push(diagnostic(&format!("check.{}", c.condition), &label, 0.0, c.value, integ.h, seed, notes));
                let _ = writeln!(out.log, "{} {verdict}: {}", c.condition, c.detail);
            }
            let search: ThetaSearch = block.theta_search(sys.dim());
            let theta = theta_g(sys, block.theta_lambda, &search)?;
            out.rows.push(diagnostic(
                "theta_g",
                &label,
                0.0,
                theta.value,
                integ.h,
                seed,
                vec![
                    format!("lambda={}", block.theta_lambda),
                    if theta.certified { "certified".into() } else { "empirical".into() },
                ],
            ));
        }
        Command::Simulate => {
            let b = cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
            let v0 = b.v0.clone().expect("resolved");
            let path = sample_path(seed, b.path_index, integ.n_steps(), integ.h, sys.noise_dim());
            let tr = integrate(sys, &b.x0, &v0, &path, &integ)?;
            let mut csv = Vec::new();
            tr.write_csv(&mut csv, cfg.output.stride)
                .map_err(|e| CliError::Io(e.to_string()))?;
            out.files.push(("trajectory.csv".into(), csv));
            let t_end = *tr.times.last().expect("non-empty trajectory");
            let mut notes = vec![format!("path_index={}", b.path_index)];
            if let Some(step) = tr.exit_step {
                notes.push(format!("exploded_at_step={step}"));
            }
            if tr.clamped > 0 {
                notes.push(format!("clamped={}", tr.clamped));
            }
            for (name, vals) in [("x", tr.final_x()), ("v", tr.final_v())] {
                for (i, v) in vals.iter().enumerate() {
                    out.rows.push(diagnostic(
                        &format!("simulate.{name}{}", i + 1),
                        &label,
                        t_end,
                        *v,
                        integ.h,
                        seed,
                        notes.clone(),
                    ));
                }
            }
            let _ = writeln!(
                out.log,
                "trajectory: states={} exploded={} clamped_steps={}",
                tr.len(),
                tr.exploded(),
                tr.clamped
            );
        }
        Command::Gradient => {
            let b = cfg.gradient.as_ref().ok_or_else(|| missing("gradient"))?;
            let v = b.v.clone().expect("resolved");
            let t = b.t.expect("resolved");
            if matches!(b.method, GradientMethod::Bel | GradientMethod::Both) {
                let r = bel_gradient(sys, &b.x, &v, &b.payoff, t, mc, &integ)?;
                out.log.push_str(&tally_line("bel_gradient", &r.tally, r.n_paths));
                out.rows.push(r);
            }
            if matches!(b.method, GradientMethod::Fd | GradientMethod::Both) {
                let r = fd_gradient(sys, &b.x, &v, &b.payoff, t, b.delta, mc, &integ)?;
                out.log.push_str(&tally_line("fd_gradient", &r.tally, r.n_paths));
                out.rows.push(r);
            }
        }
        Command::Converge => {
            let b = cfg.converge.as_ref().ok_or_else(|| missing("converge"))?;
            let res = b.resolution.expect("resolved");
            let mut fam = MollifiedFamily::with_resolution(
                sys.clone(),
                BallResolution {
                    radial: res.radial,
                    angular: res.angular,
                },
            )?;
            if let Some(c) = b.eps_ceiling {
                fam = fam.with_eps_ceiling(c);
            }
            let _ = writeln!(out.log, "family: lambda0={} eps0={}", fam.lambda0(), fam.eps0());
            let v = b.v.clone().expect("resolved");
            let table = family_convergence(&fam, &b.eps_list, &b.x, &v, b.t.expect("resolved"), mc, &integ)?;
            out.log.push_str(&tally_line("family_convergence", &table.tally, table.n_paths));
            out.rows = table.to_reports(&label, seed);
        }
        Command::Ibp => {
            let b = cfg.ibp.as_ref().ok_or_else(|| missing("ibp"))?;
            let omega = McConfig {
                n_paths: b.n_omega,
                ..mc.clone()
            };
            let phi = b.phi.clone().expect("resolved");
            let t = b.t.expect("resolved");
            let stats = ibp_residual(sys, t, &b.grid, &phi, b.i, &omega, &integ)?;
            out.log.push_str(&tally_line("ibp_residual", &stats.tally, b.n_omega));
            for (name, value) in [("ibp_residual.mean", stats.mean), ("ibp_residual.max", stats.max)] {
                let unreliable = stats.tally.unreliable(b.n_omega);
                out.rows.push(EstimateReport {
                    estimator: name.into(),
                    system: label.clone(),
                    t,
                    value,
                    std_error: 0.0,
                    n_paths: b.n_omega,
                    h: integ.h,
                    master_seed: seed,
                    tally: stats.tally.clone(),
                    unreliable,
                    notes: vec![format!("i={}", b.i), format!("grid={}", b.grid.points_per_axis)],
                });
            }
        }
        Command::Krylov => {
            let b = cfg.krylov.as_ref().ok_or_else(|| missing("krylov"))?;
            let rep = krylov_check(sys, &b.x, &b.spec(), b.t.expect("resolved"), mc, &integ)?;
            out.log.push_str(&tally_line("krylov_check", &rep.tally, rep.n_paths));
            out.rows.push(rep.to_report(&label, seed));
        }
        Command::Moments => {
            let b = cfg.moments.as_ref().ok_or_else(|| missing("moments"))?;
            let v = b.v.clone().expect("resolved");
            let t = b.t.expect("resolved");
            let r = derivative_moment(sys, &b.x, &v, b.p, t, mc, &integ)?;
            out.log.push_str(&tally_line("derivative_moment", &r.tally, r.n_paths));
            out.rows.push(r.with_note(format!("p={}", b.p)));
            let mut search = ThetaSearch::default_for(sys.dim());
            if let Some(n) = b.theta_points_per_axis {
                search.points_per_axis = n;
            }
            let chk = flow_moment_bound_check(sys, &b.x, b.lambda, t, b.checkpoints, mc, &integ, &search)?;
            out.log.push_str(&tally_line("flow_moment", &chk.tally, chk.n_paths));
            out.rows.extend(chk.to_reports(&label, integ.h, seed));
        }
    }
    Ok(out)
}
