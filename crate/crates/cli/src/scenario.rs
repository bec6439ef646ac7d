//! Scenario files: a model, initial data, numerics and per-pipeline settings.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sdde_core::analysis::{BasinConfig, StabilityConfig};
use sdde_core::expr::{parse_with, Context, DerivativeMode, Env};
use sdde_core::lyapunov::ExponentConfig;
use sdde_core::presets::{self, DelaySpec};
use sdde_core::{Phase, SddeModel, Segment, StepControl, TorusFlow};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    /// Overrides the preset's driving flow.
    #[serde(default)]
    pub driving: Option<DrivingSpec>,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    pub initial: InitialSpec,
    #[serde(default)]
    pub step: StepControl,
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default)]
    pub lyapunov: ExponentConfig,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub cover: CoverSpec,
    #[serde(default)]
    pub basin: BasinSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Preset {
        name: String,
        #[serde(default)]
        params: HashMap<String, f64>,
    },
    Dsl {
        r: f64,
        field: Vec<String>,
        delay: DelaySpec,
        #[serde(default)]
        params: HashMap<String, f64>,
        #[serde(default)]
        derivative_mode: DerivativeMode,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivingSpec {
    pub freq: Vec<f64>,
    #[serde(default)]
    pub minimal: bool,
}

/// History on `[-r, 0]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    Constant(Vec<f64>),
    /// One expression of `s` per component, sampled on 32 pieces.
    Expr(Vec<String>),
    Nodes(Segment),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub horizon: f64,
    pub stride: f64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { horizon: 10.0, stride: 0.05 }
    }
}

/// Sampling of the invariant set from the scenario's initial data.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmegaSpec {
    pub transient: f64,
    pub stride: f64,
    pub points: usize,
}

impl Default for OmegaSpec {
    fn default() -> Self {
        Self { transient: 20.0, stride: 1.0, points: 16 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(flatten)]
    pub probe: StabilityConfig,
    /// Uses this instead of estimating the exponent first.
    pub lambda_hat: Option<f64>,
    /// Number of sampled points of the invariant set to perturb.
    pub points: usize,
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self { probe: StabilityConfig::default(), lambda_hat: None, points: 2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSpec {
    /// Extra constant initial data besides `initial`.
    pub initials: Vec<Vec<f64>>,
    pub transient: f64,
    pub sample: f64,
    pub stride: f64,
    pub probe_index: usize,
    pub return_tol: f64,
    pub cluster_tol: f64,
}

impl Default for CoverSpec {
    fn default() -> Self {
        Self {
            initials: Vec::new(),
            transient: 40.0,
            sample: 10.0,
            stride: 0.5,
            probe_index: 0,
            return_tol: 1e-9,
            cluster_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinSpec {
    #[serde(flatten)]
    pub probe: BasinConfig,
    /// Constant initial data to probe.
    pub probes: Vec<Vec<f64>>,
    /// Length of the reference sample of the attractor.
    pub reference_span: f64,
}

impl Default for BasinSpec {
    fn default() -> Self {
        Self {
            probe: BasinConfig::default(),
            probes: vec![vec![1.0], vec![10.0]],
            reference_span: 2.0,
        }
    }
}

/// Loads a scenario, applying `key.path=value` overrides first.
pub fn load(path: &Path, overrides: &[String]) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    from_value(value)
}

pub fn from_value(value: Value) -> Result<Scenario, CliError> {
    if let Some(v) = value.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(CliError::Validation(format!("schema_version: unsupported value {v}")));
        }
    }
    let mut value = value;
    if let Value::Object(map) = &mut value {
        map.remove("schema_version");
    }
    let sc: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Validation(format!("{path}: {}", e.inner()))
    })?;
    sc.validate()?;
    Ok(sc)
}

fn apply_override(root: &mut Value, ov: &str) -> Result<(), CliError> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set {ov}: expected key=value")))?;
    let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("--set {key}: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl Scenario {
    fn validate(&self) -> Result<(), CliError> {
        let model = self.build_model()?;
        self.theta0(&model)?;
        self.initial_segment(&model)?;
        self.step.validate().map_err(|e| CliError::Validation(format!("step: {e}")))?;
        let positive = [
            ("simulate.horizon", self.simulate.horizon),
            ("simulate.stride", self.simulate.stride),
            ("omega.stride", self.omega.stride),
            ("lyapunov.horizon", self.lyapunov.horizon),
            ("certify.horizon", self.certify.probe.horizon),
            ("cover.stride", self.cover.stride),
            ("cover.return_tol", self.cover.return_tol),
            ("cover.cluster_tol", self.cover.cluster_tol),
            ("basin.horizon", self.basin.probe.horizon),
            ("basin.stride", self.basin.probe.stride),
            ("basin.eps_match", self.basin.probe.eps_match),
        ];
        let non_negative = [
            ("omega.transient", self.omega.transient),
            ("cover.transient", self.cover.transient),
            ("cover.sample", self.cover.sample),
            ("basin.reference_span", self.basin.reference_span),
        ];
        let optional = [
            ("lyapunov.window", self.lyapunov.window),
            ("certify.delta", self.certify.probe.delta),
            ("basin.phase_tol", self.basin.probe.phase_tol),
        ];
        for (key, v) in positive.into_iter().chain(optional.into_iter().filter_map(|(k, v)| v.map(|v| (k, v)))) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("{key}: must be positive and finite, got {v}")));
            }
        }
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("{key}: must be non-negative and finite, got {v}")));
            }
        }
        let counts = [
            ("omega.points", self.omega.points),
            ("lyapunov.directions", self.lyapunov.directions),
            ("certify.points", self.certify.points),
            ("certify.perturbations", self.certify.probe.perturbations),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(CliError::Validation(format!("{key}: must be at least 1")));
            }
        }
        if self.certify.probe.grid < 2 {
            return Err(CliError::Validation("certify.grid: must be at least 2".into()));
        }
        if let Some(l) = self.certify.lambda_hat {
            if !l.is_finite() {
                return Err(CliError::Validation("certify.lambda_hat: must be finite".into()));
            }
        }
        if !(self.lyapunov.bound_margin > 0.0) {
            return Err(CliError::Validation("lyapunov.bound_margin: must be positive".into()));
        }
        for (i, v) in self.cover.initials.iter().chain(&self.basin.probes).enumerate() {
            if v.len() != model.dim() {
                let key = if i < self.cover.initials.len() { "cover.initials" } else { "basin.probes" };
                return Err(CliError::Validation(format!("{key}: entries need {} components", model.dim())));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<SddeModel, CliError> {
        let bad = |key: &str, e: sdde_core::Error| CliError::Validation(format!("{key}: {e}"));
        let model = match &self.model {
            ModelSpec::Preset { name, params } => presets::by_name(name, params).map_err(|e| bad("model.preset", e))?,
            ModelSpec::Dsl { r, field, delay, params, derivative_mode } => {
                let driving = match &self.driving {
                    Some(d) => TorusFlow::new(d.freq.clone(), d.minimal).map_err(|e| bad("driving.freq", e))?,
                    None => return Err(CliError::Validation("driving: required for DSL models".into())),
                };
                let comps: Vec<&str> = field.iter().map(String::as_str).collect();
                presets::from_dsl_with_mode(&self.name, field.len(), *r, driving, &comps, delay.clone(), params, *derivative_mode)
                    .map_err(|e| bad("model.dsl", e))?
            }
        };
        match (&self.model, &self.driving) {
            (ModelSpec::Preset { .. }, Some(d)) => {
                let flow = TorusFlow::new(d.freq.clone(), d.minimal).map_err(|e| bad("driving.freq", e))?;
                if flow.dim() != model.driving().dim() {
                    return Err(CliError::Validation(format!(
                        "driving.freq: preset expects {} frequencies",
                        model.driving().dim()
                    )));
                }
                Ok(model.with_driving(flow))
            }
            _ => Ok(model),
        }
    }

    pub fn theta0(&self, model: &SddeModel) -> Result<Phase, CliError> {
        let coords = self.theta0.clone().unwrap_or_else(|| vec![0.0; model.driving().dim()]);
        if coords.len() != model.driving().dim() || coords.iter().any(|c| !c.is_finite()) {
            return Err(CliError::Validation(format!(
                "theta0: expected {} finite coordinates",
                model.driving().dim()
            )));
        }
        Ok(Phase::new(coords))
    }

    pub fn initial_segment(&self, model: &SddeModel) -> Result<Segment, CliError> {
        initial_segment(&self.initial, model)
    }
}

pub fn initial_segment(spec: &InitialSpec, model: &SddeModel) -> Result<Segment, CliError> {
    let (n, r) = (model.dim(), model.max_delay());
    let bad = |m: String| CliError::Validation(format!("initial: {m}"));
    match spec {
        InitialSpec::Constant(c) => {
            if c.len() != n {
                return Err(bad(format!("expected {n} components, got {}", c.len())));
            }
            Ok(Segment::constant(r, nalgebra::DVector::from_column_slice(c)))
        }
        InitialSpec::Expr(srcs) => {
            if srcs.len() != n {
                return Err(bad(format!("expected {n} expressions, got {}", srcs.len())));
            }
            let mut exprs = Vec::new();
            for src in srcs {
                let e = parse_with(src, &HashMap::from([("r".to_string(), r)])).map_err(|e| bad(e.to_string()))?;
                e.validate(Context::Initial, n, model.driving().dim(), r).map_err(|e| bad(e.to_string()))?;
                let de = sdde_core::expr::diff(&e, &sdde_core::expr::Var::S);
                exprs.push((e, de));
            }
            let eval = |s: f64, pick: fn(&(sdde_core::expr::Expr, sdde_core::expr::Expr)) -> &sdde_core::expr::Expr| {
                nalgebra::DVector::from_iterator(
                    n,
                    exprs.iter().map(|p| {
                        pick(p)
                            .eval(&Env { s: Some(s), ..Env::default() })
                            .unwrap_or(f64::NAN)
                    }),
                )
            };
            let seg = Segment::from_fn(r, 32, |s| eval(s, |p| &p.0), |s| eval(s, |p| &p.1)).map_err(|e| bad(e.to_string()))?;
            if seg.norm_w().is_nan() {
                return Err(bad("expression not finite on [-r, 0]".into()));
            }
            Ok(seg)
        }
        InitialSpec::Nodes(seg) => {
            if seg.dim() != n || (seg.r() - r).abs() > 1e-12 * r {
                return Err(bad(format!("segment must have dim {n} and r = {r}")));
            }
            Ok(seg.clone())
        }
    }
}
