use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::linalg::dot;

pub const CSV_HEADER: &str = "estimator,system,params_hash,t,value,std_error,n_paths,h,flags";

/// Share of failed paths above which a report is flagged unreliable.
const UNRELIABLE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool. Never part of a config
    /// file since results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn default_n_paths() -> usize {
    100_000
}
fn default_seed() -> u64 {
    1
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: default_n_paths(),
            master_seed: default_seed(),
            workers: None,
        }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, master_seed: u64) -> Self {
        Self {
            n_paths,
            master_seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(FlowError::InvalidArgument("n_paths must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(FlowError::InvalidArgument("workers must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `job(path_index)` for every path and returns the results in index
/// order.
pub fn run_paths<T, F>(n_paths: usize, workers: Option<usize>, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let work = || (0..n_paths as u64).into_par_iter().map(&job).collect::<Vec<T>>();
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

/// Mean and standard error (`sample std / sqrt(n)`), reduced in order.
pub fn sample_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n as f64 - 1.0) / n as f64).sqrt())
}

/// Per-run failure bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PathTally {
    pub exits: usize,
    pub singular_diffusion: usize,
    pub integration_errors: usize,
    pub clamped_steps: usize,
    pub first_error: Option<String>,
}

impl PathTally {
    pub fn failed(&self) -> usize {
        self.exits + self.singular_diffusion + self.integration_errors
    }

    pub fn record_error(&mut self, err: &FlowError) {
        match err {
            FlowError::NearSingularDiffusion { .. } => self.singular_diffusion += 1,
            _ => self.integration_errors += 1,
        }
        if self.first_error.is_none() {
            self.first_error = Some(err.to_string());
        }
    }

    pub fn unreliable(&self, n_paths: usize) -> bool {
        self.failed() as f64 > UNRELIABLE_FRACTION * n_paths as f64
    }
}

/// Outcome of one simulated path.
#[derive(Debug, Clone)]
pub(crate) enum PathResult<T> {
    Done { value: T, clamped: usize },
    Exited,
    Failed(FlowError),
}

/// Splits path results into the successful values and a tally.
pub(crate) fn collect<T>(results: Vec<PathResult<T>>) -> (Vec<T>, PathTally) {
    let mut tally = PathTally::default();
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        match r {
            PathResult::Done { value, clamped } => {
                tally.clamped_steps += clamped;
                values.push(value);
            }
            PathResult::Exited => tally.exits += 1,
            PathResult::Failed(e) => tally.record_error(&e),
        }
    }
    (values, tally)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: String,
    pub system: String,
    pub t: f64,
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub h: f64,
    pub master_seed: u64,
    pub tally: PathTally,
    pub unreliable: bool,
    /// Free-form markers such as `outside_window`.
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub(crate) fn from_values(
        estimator: impl Into<String>,
        system: impl Into<String>,
        t: f64,
        h: f64,
        n_paths: usize,
        master_seed: u64,
        values: &[f64],
        tally: PathTally,
    ) -> Self {
        let (value, std_error) = sample_stats(values);
        let unreliable = tally.unreliable(n_paths);
        Self {
            estimator: estimator.into(),
            system: system.into(),
            t,
            value,
            std_error,
            n_paths,
            h,
            master_seed,
            tally,
            unreliable,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// `|value - target| <= k * std_error`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// `;`-separated flag list: seed, failure counts and notes.
    pub fn flags(&self) -> String {
        let mut parts = vec![format!("seed={}", self.master_seed)];
        let t = &self.tally;
        if t.exits > 0 {
            parts.push(format!("exits={}", t.exits));
        }
        if t.singular_diffusion > 0 {
            parts.push(format!("singular_diffusion={}", t.singular_diffusion));
        }
        if t.integration_errors > 0 {
            parts.push(format!("integration_errors={}", t.integration_errors));
        }
        if t.clamped_steps > 0 {
            parts.push(format!("clamped={}", t.clamped_steps));
        }
        parts.extend(self.notes.iter().cloned());
        if self.unreliable {
            parts.push("unreliable".into());
        }
        parts.join(";")
    }

    pub fn csv_row(&self, params_hash: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&self.estimator),
            csv_field(&self.system),
            params_hash,
            format_number(self.t),
            format_number(self.value),
            format_number(self.std_error),
            self.n_paths,
            format_number(self.h),
            csv_field(&self.flags())
        )
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-5, 1e16)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Test functions for gradients and expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// `x_i`
    Identity {
        #[serde(default)]
        component: usize,
    },
    /// `sin(x_i)`
    Sin {
        #[serde(default)]
        component: usize,
    },
    /// `exp(-|x|^2)`
    Gaussian,
    Constant { value: f64 },
}

impl Payoff {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Payoff::Identity { component } => x[component],
            Payoff::Sin { component } => x[component].sin(),
            Payoff::Gaussian => (-dot(x, x)).exp(),
            Payoff::Constant { value } => value,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Payoff::Identity { component } => format!("x{}", component + 1),
            Payoff::Sin { component } => format!("sin(x{})", component + 1),
            Payoff::Gaussian => "exp(-|x|^2)".into(),
            Payoff::Constant { value } => format!("const({value})"),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Payoff::Identity { component } | Payoff::Sin { component } if component >= d => {
                Err(FlowError::Dimension {
                    expected: d,
                    got: component + 1,
                })
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_match_hand_computation() {
        let (m, se) = sample_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(sample_stats(&[7.0; 10]).1, 0.0);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, 0.001, 2.8811328013866355e-15, -3.5e20, 0.36788] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(2.5e-15), "2.5e-15");
        assert_eq!(format_number(0.001), "0.001");
    }

    #[test]
    fn run_paths_preserves_order() {
        for w in [None, Some(1), Some(3)] {
            let out = run_paths(100, w, |i| i * i);
            assert_eq!(out, (0..100u64).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn unreliable_threshold() {
        let mut t = PathTally::default();
        t.exits = 1;
        assert!(!t.unreliable(1000));
        assert!(t.unreliable(999));
    }

    #[test]
    fn csv_row_layout() {
        let r = EstimateReport::from_values("bel_gradient", "ou", 1.0, 0.001, 2, 42, &[1.0, 3.0], PathTally::default())
            .with_note("outside_window");
        assert_eq!(r.csv_row("abc"), "bel_gradient,ou,abc,1,2,1,2,0.001,seed=42;outside_window");
    }

    #[test]
    fn payoff_values() {
        assert_eq!(Payoff::Identity { component: 1 }.eval(&[1.0, 2.0]), 2.0);
        assert_eq!(Payoff::Gaussian.eval(&[0.0]), 1.0);
        assert!(Payoff::Sin { component: 2 }.validate(2).is_err());
    }
}
