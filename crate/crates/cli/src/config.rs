//! Experiment configuration: parsing, validation, default materialisation
//! and the canonical hash.

use std::fmt;
use std::path::Path;

use flowlab::coefficients::{CheckSpec, ThetaSearch};
use flowlab::estimators::{BumpFunction, CylinderFunction, IbpBox, KrylovSpec, MomentWindow, Payoff};
use flowlab::{Builtin, CoefficientSystem, IntegratorConfig, McConfig};
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA: &str = "flowlab/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub system: Builtin,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ibp: Option<IbpBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov: Option<KrylovBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "one_usize")]
    pub stride: usize,
}

fn one_usize() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    #[serde(default = "default_check_radius")]
    pub radius: f64,
    #[serde(default)]
    pub points_per_axis: Option<usize>,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default = "one")]
    pub theta_lambda: f64,
    #[serde(default)]
    pub theta_points_per_axis: Option<usize>,
}

fn default_check_radius() -> f64 {
    20.0
}
fn default_p_list() -> Vec<f64> {
    vec![2.0, 4.0]
}
fn one() -> f64 {
    1.0
}

impl Default for CheckBlock {
    fn default() -> Self {
        Self {
            radius: default_check_radius(),
            points_per_axis: None,
            p_list: default_p_list(),
            theta_lambda: 1.0,
            theta_points_per_axis: None,
        }
    }
}

impl CheckBlock {
    pub fn spec(&self, d: usize) -> CheckSpec {
        let mut spec = CheckSpec::default_for(d);
        spec.radius = self.radius;
        spec.p_list = self.p_list.clone();
        if let Some(n) = self.points_per_axis {
            spec.points_per_axis = n;
        }
        spec
    }

    pub fn theta_search(&self, d: usize) -> ThetaSearch {
        let mut s = ThetaSearch::default_for(d);
        if let Some(n) = self.theta_points_per_axis {
            s.points_per_axis = n;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub path_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    Bel,
    Fd,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientBlock {
    pub x: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default = "default_payoff")]
    pub payoff: Payoff,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_method")]
    pub method: GradientMethod,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_payoff() -> Payoff {
    Payoff::Identity { component: 0 }
}
fn default_method() -> GradientMethod {
    GradientMethod::Bel
}
fn default_delta() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionBlock {
    pub radial: usize,
    pub angular: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeBlock {
    pub x: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub resolution: Option<ResolutionBlock>,
    /// Replaces the family's `eps0` when present.
    #[serde(default)]
    pub eps_ceiling: Option<f64>,
}

fn default_eps_list() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpBlock {
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(rename = "box", default = "default_box")]
    pub grid: IbpBox,
    #[serde(default)]
    pub phi: Option<BumpFunction>,
    #[serde(default)]
    pub i: usize,
    #[serde(default = "default_n_omega")]
    pub n_omega: usize,
}

fn default_box() -> IbpBox {
    IbpBox {
        lo: -0.5,
        hi: 0.5,
        points_per_axis: 41,
    }
}
fn default_n_omega() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovBlock {
    pub x: Vec<f64>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "one")]
    pub c_d: f64,
    #[serde(default = "default_cylinder")]
    pub f: CylinderFunction,
}

fn default_cylinder() -> CylinderFunction {
    CylinderFunction::One
}

impl KrylovBlock {
    pub fn spec(&self) -> KrylovSpec {
        KrylovSpec {
            radius: self.radius,
            c_d: self.c_d,
            f: self.f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsBlock {
    pub x: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default = "two")]
    pub p: f64,
    /// Defaults to the moment window `T0(p)`.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default)]
    pub theta_points_per_axis: Option<usize>,
}

fn two() -> f64 {
    2.0
}
fn default_checkpoints() -> usize {
    10
}

/// A parsed, validated config together with its built system.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub system: CoefficientSystem,
}

fn unit_vector(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

fn check_len(key: &str, v: &[f64], d: usize) -> Result<(), CliError> {
    if v.len() != d {
        return Err(CliError::Validation(format!("{key}: expected {d} components, got {}", v.len())));
    }
    if !v.iter().all(|a| a.is_finite()) {
        return Err(CliError::Validation(format!("{key}: components must be finite")));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{key}: must be positive, got {v}")))
    }
}

/// Reads, validates and materialises defaults.
pub fn parse_config(path: &Path) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Two passes: a syntax pass that rejects duplicate keys with their
/// position, then the typed pass that rejects unknown or mistyped keys.
pub fn parse_config_str(text: &str) -> Result<Resolved, CliError> {
    let StrictValue(mut value) = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if let Some(system) = value.get_mut("system").and_then(Value::as_object_mut) {
        system.entry("params").or_insert_with(|| Value::Object(Map::new()));
    }
    let config: ExperimentConfig = serde_json::from_value(value).map_err(|e| CliError::Validation(e.to_string()))?;
    config.resolve()
}

/// JSON value that refuses duplicate object keys.
struct StrictValue(Value);

impl<'de> Deserialize<'de> for StrictValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(StrictVisitor).map(StrictValue)
    }
}

struct StrictVisitor;

impl<'de> Visitor<'de> for StrictVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_string()))
    }

    fn visit_unit<E: de::Error>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut out = Vec::new();
        while let Some(StrictValue(v)) = seq.next_element()? {
            out.push(v);
        }
        Ok(Value::Array(out))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
        let mut out = Map::new();
        while let Some(key) = map.next_key::<String>()? {
            if out.contains_key(&key) {
                return Err(de::Error::custom(format!("duplicate key `{key}`")));
            }
            let StrictValue(v) = map.next_value()?;
            out.insert(key, v);
        }
        Ok(Value::Object(out))
    }
}

impl ExperimentConfig {
    /// Validates every block and fills remaining defaults that depend on
    /// the system.
    pub fn resolve(mut self) -> Result<Resolved, CliError> {
        if self.schema != SCHEMA {
            return Err(CliError::Validation(format!("schema: expected \"{SCHEMA}\", got \"{}\"", self.schema)));
        }
        let system = self.system.build().map_err(|e| CliError::Validation(format!("system: {e}")))?;
        let d = system.dim();
        self.integrator
            .validate()
            .map_err(|e| CliError::Validation(format!("integrator: {e}")))?;
        self.mc.validate().map_err(|e| CliError::Validation(format!("mc: {e}")))?;
        if self.output.stride == 0 {
            return Err(CliError::Validation("output.stride: must be positive".into()));
        }
        let horizon = self.integrator.horizon;

        if let Some(b) = &self.check {
            positive("check.radius", b.radius)?;
            positive("check.theta_lambda", b.theta_lambda)?;
            if b.p_list.iter().any(|p| !(*p > 1.0)) {
                return Err(CliError::Validation("check.p_list: orders must exceed 1".into()));
            }
        }
        if let Some(b) = &mut self.simulate {
            check_len("simulate.x0", &b.x0, d)?;
            let v0 = b.v0.get_or_insert_with(|| unit_vector(d));
            check_len("simulate.v0", v0, d)?;
        }
        if let Some(b) = &mut self.gradient {
            check_len("gradient.x", &b.x, d)?;
            let v = b.v.get_or_insert_with(|| unit_vector(d));
            check_len("gradient.v", v, d)?;
            positive("gradient.t", *b.t.get_or_insert(horizon))?;
            positive("gradient.delta", b.delta)?;
            b.payoff
                .validate(d)
                .map_err(|e| CliError::Validation(format!("gradient.payoff: {e}")))?;
        }
        if let Some(b) = &mut self.converge {
            check_len("converge.x", &b.x, d)?;
            let v = b.v.get_or_insert_with(|| unit_vector(d));
            check_len("converge.v", v, d)?;
            positive("converge.t", *b.t.get_or_insert(horizon))?;
            if b.eps_list.len() < 2 || b.eps_list.windows(2).any(|w| !(w[1] < w[0])) || b.eps_list.iter().any(|e| !(*e > 0.0)) {
                return Err(CliError::Validation(
                    "converge.eps_list: need at least two positive, strictly decreasing values".into(),
                ));
            }
            if let Some(c) = b.eps_ceiling {
                positive("converge.eps_ceiling", c)?;
            }
            let res = b.resolution.get_or_insert_with(|| {
                let r = flowlab::approximation::BallResolution::default_for(d);
                ResolutionBlock {
                    radial: r.radial,
                    angular: r.angular,
                }
            });
            if res.radial == 0 || res.angular == 0 {
                return Err(CliError::Validation("converge.resolution: node counts must be positive".into()));
            }
        }
        if let Some(b) = &mut self.ibp {
            positive("ibp.t", *b.t.get_or_insert(horizon))?;
            if b.i >= d {
                return Err(CliError::Validation(format!("ibp.i: coordinate {} out of range for d = {d}", b.i)));
            }
            if b.n_omega == 0 {
                return Err(CliError::Validation("ibp.n_omega: must be positive".into()));
            }
            let (lo, hi) = (b.grid.lo, b.grid.hi);
            let phi = b.phi.get_or_insert_with(|| BumpFunction {
                center: vec![0.5 * (lo + hi); d],
                radius: 0.4 * (hi - lo),
            });
            check_len("ibp.phi.center", &phi.center, d)?;
            positive("ibp.phi.radius", phi.radius)?;
        }
        if let Some(b) = &mut self.krylov {
            check_len("krylov.x", &b.x, d)?;
            positive("krylov.t", *b.t.get_or_insert(horizon))?;
            positive("krylov.radius", b.radius)?;
            positive("krylov.c_d", b.c_d)?;
        }
        if let Some(b) = &mut self.moments {
            check_len("moments.x", &b.x, d)?;
            let v = b.v.get_or_insert_with(|| unit_vector(d));
            check_len("moments.v", v, d)?;
            positive("moments.p", b.p)?;
            let window = MomentWindow::for_system(&system, b.p).t0;
            positive("moments.t", *b.t.get_or_insert(window))?;
            positive("moments.lambda", b.lambda)?;
            if b.checkpoints == 0 {
                return Err(CliError::Validation("moments.checkpoints: must be positive".into()));
            }
        }
        Ok(Resolved { config: self, system })
    }

    /// SHA-256 over the canonical JSON (sorted keys, shortest round-trip
    /// numbers) of everything except the output block.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serialises");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let canonical = serde_json::to_string(&value).expect("value serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn echo(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let mut s = serde_json::to_string_pretty(&value).expect("value serialises");
        s.push('\n');
        s
    }
}
