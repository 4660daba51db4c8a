//! Sampled diagnostics for the growth, ellipticity and integrability
//! conditions. Nothing here is a proof: every verdict is "holds on the
//! sample" or "violated at a sampled point".

use serde::Serialize;

use super::spectral::{diffusion_matrix, kp_max};
use super::system::CoefficientSystem;
use crate::grid::BoxGrid;
use crate::linalg::{dot, min_eigenvalue, norm};
use crate::quadrature::shell_integral;

#[derive(Debug, Clone)]
pub struct CheckSpec {
    /// Half-width of the sampling box `[-radius, radius]^d`.
    pub radius: f64,
    pub points_per_axis: usize,
    pub p_list: Vec<f64>,
    /// Samples per axis of the shift box `|y| <= delta`.
    pub shift_points: usize,
    /// Ball radius of the exponential-integrability quadrature.
    pub integrability_radius: f64,
    /// Integrals above this value count as divergent.
    pub quadrature_budget: f64,
}

impl CheckSpec {
    pub fn default_for(d: usize) -> Self {
        Self {
            radius: 20.0,
            points_per_axis: if d <= 2 { 41 } else { 15 },
            p_list: vec![2.0, 4.0],
            shift_points: 5,
            integrability_radius: 1.0,
            quadrature_budget: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    /// Smallest slack (negative means violated) or the empirical constant,
    /// depending on the condition; see `detail`.
    pub value: f64,
    pub worst_point: Option<Vec<f64>>,
    pub skipped_points: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub system: String,
    pub conditions: Vec<ConditionReport>,
}

impl AssumptionReport {
    pub fn get(&self, condition: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == condition)
    }

    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict == Verdict::Pass)
    }
}

/// Tracks the worst (smallest) slack over a sample.
struct Worst {
    value: f64,
    point: Option<Vec<f64>>,
    skipped: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::INFINITY,
            point: None,
            skipped: 0,
        }
    }

    fn see(&mut self, v: f64, x: &[f64]) {
        if v < self.value {
            self.value = v;
            self.point = Some(x.to_vec());
        }
    }

    fn report(self, name: &str, tol: f64, detail: String) -> ConditionReport {
        let verdict = match self.point {
            None => Verdict::NotEvaluated,
            Some(_) if self.value >= -tol => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        ConditionReport {
            condition: name.to_string(),
            verdict,
            value: self.value,
            worst_point: self.point,
            skipped_points: self.skipped,
            detail,
        }
    }
}

/// Ratio samples `(|x|, ratio)` summarised as "bounded on the sample": the
/// outer shell must not exceed the maximum over the inner half.
fn growth_report(name: &str, samples: &[(f64, f64, Vec<f64>)], radius: f64, skipped: usize, what: &str) -> ConditionReport {
    if samples.is_empty() {
        return ConditionReport {
            condition: name.to_string(),
            verdict: Verdict::NotEvaluated,
            value: f64::NAN,
            worst_point: None,
            skipped_points: skipped,
            detail: format!("no evaluable sample points for {what}"),
        };
    }
    let (mut c_emp, mut arg) = (f64::NEG_INFINITY, samples[0].2.clone());
    let mut inner = f64::NEG_INFINITY;
    let mut outer = f64::NEG_INFINITY;
    for (r, ratio, x) in samples {
        if *ratio > c_emp {
            c_emp = *ratio;
            arg = x.clone();
        }
        if *r <= 0.5 * radius {
            inner = inner.max(*ratio);
        }
        if *r >= 0.9 * radius {
            outer = outer.max(*ratio);
        }
    }
    let finite = samples.iter().all(|s| s.1.is_finite());
    let bounded = outer <= 0.0 || outer <= inner.max(0.0) * (1.0 + 1e-9) || inner == f64::NEG_INFINITY;
    ConditionReport {
        condition: name.to_string(),
        verdict: if finite && bounded { Verdict::Pass } else { Verdict::Fail },
        value: c_emp.max(0.0),
        worst_point: Some(arg),
        skipped_points: skipped,
        detail: format!("empirical constant {c_emp:.6e} for {what}; inner max {inner:.3e}, outer-shell max {outer:.3e}"),
    }
}

pub fn check_assumptions(sys: &CoefficientSystem, spec: &CheckSpec) -> AssumptionReport {
    let (d, m) = (sys.dim(), sys.noise_dim());
    let c = *sys.constants();
    let grid = BoxGrid::new(d, -spec.radius, spec.radius, spec.points_per_axis);
    let points: Vec<Vec<f64>> = grid.points().filter(|x| norm(x) <= spec.radius).collect();
    let mut values = vec![0.0; sys.values_len()];
    let mut conditions = Vec::new();

    // (c1) ellipticity floor
    let mut worst = Worst::new();
    for x in &points {
        match diffusion_matrix(sys, x) {
            Ok(a) => {
                let floor = c.c1 / (1.0 + norm(x).powf(c.p1));
                worst.see(min_eigenvalue(&a, d) - floor, x);
            }
            Err(_) => worst.skipped += 1,
        }
    }
    conditions.push(worst.report(
        "c1",
        1e-12,
        format!("min eig A(x) - C1/(1+|x|^p1), C1={}, p1={}", c.c1, c.p1),
    ));

    // (c2aa) linear-type growth of every field
    let mut worst = Worst::new();
    for x in &points {
        if sys.values_into(x, &mut values).is_err() {
            worst.skipped += 1;
            continue;
        }
        let bound = c.c2 * (1.0 + norm(x).powf(c.p2));
        let largest = (0..=m)
            .map(|k| norm(&values[k * d..(k + 1) * d]))
            .fold(0.0, f64::max);
        worst.see(bound - largest, x);
    }
    conditions.push(worst.report(
        "c2aa",
        0.0,
        format!("C2(1+|x|^p2) - max_k |X_k(x)|, C2={}, p2={}", c.c2, c.p2),
    ));

    // (c2) one-sided growth, sup over shifted points
    let shifts: Vec<Vec<f64>> = BoxGrid::new(d, -c.delta, c.delta, spec.shift_points)
        .points()
        .filter(|y| norm(y) <= c.delta + 1e-12)
        .collect();
    for &p in &spec.p_list {
        let mut samples = Vec::new();
        let mut skipped = 0;
        let mut shifted = vec![0.0; d];
        for x in &points {
            let mut sup = f64::NEG_INFINITY;
            let mut ok = true;
            for y in &shifts {
                for i in 0..d {
                    shifted[i] = x[i] + y[i];
                }
                if sys.values_into(&shifted, &mut values).is_err() {
                    ok = false;
                    break;
                }
                let diff: f64 = (1..=m).map(|k| p * dot(&values[k * d..(k + 1) * d], &values[k * d..(k + 1) * d])).sum();
                sup = sup.max(diff + dot(x, &values[..d]));
            }
            if ok {
                samples.push((norm(x), sup / (1.0 + dot(x, x)), x.clone()));
            } else {
                skipped += 1;
            }
        }
        conditions.push(growth_report(
            &format!("c2(p={p})"),
            &samples,
            spec.radius,
            skipped,
            "sup_y (p sum|X_k(x+y)|^2 + <x, X_0(x+y)>) / (1+|x|^2)",
        ));
    }

    // (c3) local exponential integrability of K_p, by an inner-radius refinement study
    for &p in &spec.p_list {
        conditions.push(integrability_report(sys, p, spec));
    }

    // (c4) Jacobian growth outside R1
    let outside: Vec<&Vec<f64>> = points.iter().filter(|x| norm(x) > c.r1).collect();
    let mut jac = vec![0.0; sys.jacobians_len()];
    let dd = d * d;
    let mut worst = Worst::new();
    for x in &outside {
        if sys.jacobians_into(x, &mut jac).is_err() {
            worst.skipped += 1;
            continue;
        }
        let bound = c.c3 * (1.0 + norm(x).powf(c.p5));
        let largest = (0..=m)
            .map(|k| norm(&jac[k * dd..(k + 1) * dd]))
            .fold(0.0, f64::max);
        worst.see(bound - largest, x);
    }
    conditions.push(worst.report(
        "c4",
        0.0,
        format!("C3(1+|x|^p5) - max_k |DX_k(x)|_F on |x|>R1, C3={}, p5={}, R1={}", c.c3, c.p5, c.r1),
    ));

    // (c4aa) K_p at most logarithmic outside R1
    for &p in &spec.p_list {
        let mut samples = Vec::new();
        let mut skipped = 0;
        for x in &outside {
            match kp_max(sys, x, p) {
                Ok(rep) => samples.push((norm(x), rep.kp / (1.0 + dot(x, x)).ln(), (*x).clone())),
                Err(_) => skipped += 1,
            }
        }
        conditions.push(growth_report(
            &format!("c4aa(p={p})"),
            &samples,
            spec.radius,
            skipped,
            "K_p(x) / log(1+|x|^2) on |x|>R1",
        ));
    }

    AssumptionReport {
        system: sys.label().to_string(),
        conditions,
    }
}

/// Refinement study for `int_{|x| <= R} exp(kappa(p) K_p(x)) dx`: the inner
/// radius shrinks by decades down to the singular radius (or `1e-8`).
fn integrability_report(sys: &CoefficientSystem, p: f64, spec: &CheckSpec) -> ConditionReport {
    let d = sys.dim();
    let kappa = sys.constants().kappa(p);
    let outer = spec.integrability_radius;
    let floor = sys.origin_policy().r_min().unwrap_or(1e-8).max(1e-12);
    let mut skipped = 0usize;
    let mut worst_point: Option<Vec<f64>> = None;
    let mut worst_kp = f64::NEG_INFINITY;
    let mut integrand = |x: &[f64]| -> f64 {
        match kp_max(sys, x, p) {
            Ok(rep) => {
                if rep.kp > worst_kp {
                    worst_kp = rep.kp;
                    worst_point = Some(x.to_vec());
                }
                (kappa * rep.kp).exp()
            }
            Err(_) => {
                skipped += 1;
                0.0
            }
        }
    };
    let angular = if d == 2 { 32 } else { 0 };
    let mut inner = outer;
    let mut total = 0.0;
    let mut last_increment = 0.0;
    let mut history = Vec::new();
    while inner > floor * (1.0 + 1e-12) {
        let next = (inner / 10.0).max(floor);
        let piece = shell_integral(d, next, inner, 2, 12, angular, &mut integrand);
        total += piece;
        last_increment = piece;
        history.push(total);
        inner = next;
        if !total.is_finite() || total > spec.quadrature_budget {
            break;
        }
    }
    let converged = total.is_finite() && last_increment <= 1e-3 * total.abs().max(1e-300);
    let within = total.is_finite() && total <= spec.quadrature_budget;
    let verdict = if history.is_empty() {
        Verdict::NotEvaluated
    } else if within && converged {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ConditionReport {
        condition: format!("c3(p={p})"),
        verdict,
        value: total,
        worst_point,
        skipped_points: skipped,
        detail: format!(
            "kappa={kappa}, radius={outer}, inner radius reached {inner:.1e}, last shell {last_increment:.3e}, largest K_p {worst_kp:.3e}, budget {:.1e}",
            spec.quadrature_budget
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin::{self, IrregularParams};
    use crate::coefficients::system::{AssumptionConstants, KappaRule, OriginPolicy, VectorFields};
    use std::sync::Arc;

    #[test]
    fn identity_diffusion_passes_everything() {
        let sys = builtin::additive_noise(2, 1.0);
        let rep = check_assumptions(&sys, &CheckSpec::default_for(2));
        for c in &rep.conditions {
            assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        }
    }

    #[test]
    fn example21_negative_q2_ellipticity() {
        let sys = builtin::example21(&IrregularParams {
            d: 2,
            q1: 0.8,
            q2: -0.3,
            q3: 0.5,
            q4: 1.0,
            r_min: 1e-6,
        })
        .unwrap();
        let spec = CheckSpec::default_for(2);
        let rep = check_assumptions(&sys, &spec);
        assert_eq!(rep.get("c1").unwrap().verdict, Verdict::Pass);
        assert_eq!(rep.get("c2aa").unwrap().verdict, Verdict::Pass);
        assert_eq!(rep.get("c4").unwrap().verdict, Verdict::Pass);

        // A floor decaying only like |x|^{-0.3} is too strong for |x|^{-0.6} decay.
        let mut c = *sys.constants();
        c.p1 = 0.3;
        let weak = sys.clone().with_constants(c);
        let wide = CheckSpec {
            radius: 60.0,
            ..CheckSpec::default_for(2)
        };
        let rep = check_assumptions(&weak, &wide);
        assert_eq!(rep.get("c1").unwrap().verdict, Verdict::Fail);
    }

    /// `X_1(x) = sqrt(|x|)`, no drift, `d = m = 1`.
    #[derive(Debug)]
    struct SqrtNoise;

    impl VectorFields for SqrtNoise {
        fn dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn values(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
            out[1] = x[0].abs().sqrt();
        }
        fn jacobians(&self, x: &[f64], out: &mut [f64]) -> bool {
            out[0] = 0.0;
            out[1] = 0.5 * x[0].signum() / x[0].abs().sqrt();
            true
        }
    }

    #[test]
    fn non_lipschitz_noise_fails_integrability() {
        let constants = AssumptionConstants {
            p1: 1.0,
            p2: 1.0,
            p3: 5.0,
            p4: 3.0,
            p5: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            r1: 1.0,
            delta: 1.0,
            kappa: KappaRule::Constant { value: 10.0 },
        };
        let sys = CoefficientSystem::new(
            "sqrt_noise",
            Arc::new(SqrtNoise),
            constants,
            OriginPolicy::SingularJacobian { r_min: 1e-9 },
        );
        let spec = CheckSpec {
            p_list: vec![2.0],
            ..CheckSpec::default_for(1)
        };
        let rep = check_assumptions(&sys, &spec);
        assert_eq!(rep.get("c3(p=2)").unwrap().verdict, Verdict::Fail);
    }
}
