//! Built-in models and a constructor for DSL-defined ones.
//!
//! | name | field | delay | driving |
//! |------|-------|-------|---------|
//! | `m0` | `-a*y1_1` | `r` | `ν = (1)` |
//! | `m1` | `-b*y2_1` | `1` | `ν = (1)` |
//! | `m2` | `-a*y1_1 - b*y2_1` | `(r/2)*(1 + tanh(x0_1))` | `ν = (1)` |
//! | `m3` | `-y1_1 - 0.5*y2_1 + 1.5*(cos(th1) + sin(th2))` | as `m2` | `ν = (1, golden ratio − 1)` |
//! | `m4` | `-(y1_1 - s)*(y1_1 + s)*y1_1`, `s = 1 + 0.3 sin(th1)` | `r` | `ν = (1)` |

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::driving::TorusFlow;
use crate::error::{Error, Result};
use crate::expr::{parse_with, DelayForm, DerivativeMode, ExprField};
use crate::sdde::SddeModel;

pub const GOLDEN_FREQ: f64 = 0.6180339887498949;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelaySpec {
    Constant(f64),
    Expr(String),
}

pub fn from_dsl(
    name: &str,
    dim: usize,
    r: f64,
    driving: TorusFlow,
    field: &[&str],
    delay: DelaySpec,
    params: &HashMap<String, f64>,
) -> Result<SddeModel> {
    from_dsl_with_mode(name, dim, r, driving, field, delay, params, DerivativeMode::Symbolic)
}

/// `r` is available as a parameter unless `params` overrides it.
#[allow(clippy::too_many_arguments)]
pub fn from_dsl_with_mode(
    name: &str,
    dim: usize,
    r: f64,
    driving: TorusFlow,
    field: &[&str],
    delay: DelaySpec,
    params: &HashMap<String, f64>,
    mode: DerivativeMode,
) -> Result<SddeModel> {
    if field.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: field.len(),
        });
    }
    let mut params = params.clone();
    params.entry("r".into()).or_insert(r);
    let comps = field
        .iter()
        .map(|src| parse_with(src, &params))
        .collect::<Result<Vec<_>>>()?;
    let phase_dim = driving.dim();
    let field = ExprField::new(comps, phase_dim, r, mode)?;
    let delay = match delay {
        DelaySpec::Constant(c) => DelayForm::constant(c, r)?,
        DelaySpec::Expr(src) => DelayForm::discrete(parse_with(&src, &params)?, dim, phase_dim, r)?,
    };
    SddeModel::new(name, r, driving, Arc::new(field), Arc::new(delay))
}

fn build(name: &str, r: f64, driving: TorusFlow, field: &str, delay: DelaySpec, params: &[(&str, f64)]) -> SddeModel {
    let params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    from_dsl(name, 1, r, driving, &[field], delay, &params).expect("built-in preset is valid")
}

/// Pure decay `ẏ = -a y`, `r = 1`.
pub fn m0(a: f64) -> SddeModel {
    build("m0", 1.0, TorusFlow::periodic(1.0), "-a*y1_1", DelaySpec::Constant(1.0), &[("a", a)])
}

/// `ẏ(t) = -b y(t - 1)`.
pub fn m1(b: f64) -> SddeModel {
    build("m1", 1.0, TorusFlow::periodic(1.0), "-b*y2_1", DelaySpec::Constant(1.0), &[("b", b)])
}

/// `ẏ = -a y(t) - b y(t - τ)` with `τ = (r/2)(1 + tanh(y(t)))`.
pub fn m2(a: f64, b: f64, r: f64) -> SddeModel {
    build(
        "m2",
        r,
        TorusFlow::periodic(1.0),
        "-a*y1_1 - b*y2_1",
        DelaySpec::Expr("(r/2)*(1 + tanh(x0_1))".into()),
        &[("a", a), ("b", b)],
    )
}

/// `m2`-type delay with quasi-periodic two-frequency forcing of amplitude `c`.
pub fn m3(c: f64) -> SddeModel {
    let driving = TorusFlow::new(vec![1.0, GOLDEN_FREQ], true).expect("finite frequencies");
    build(
        "m3",
        1.0,
        driving,
        "-y1_1 - 0.5*y2_1 + c*(cos(th1) + sin(th2))",
        DelaySpec::Expr("(r/2)*(1 + tanh(x0_1))".into()),
        &[("c", c)],
    )
}

/// Two symmetric attracting branches `y ≈ ±(1 + 0.3 sin θ)`.
pub fn m4() -> SddeModel {
    build(
        "m4",
        1.0,
        TorusFlow::periodic(1.0),
        "-(y1_1 - (1 + 0.3*sin(th1)))*(y1_1 + (1 + 0.3*sin(th1)))*y1_1",
        DelaySpec::Constant(1.0),
        &[],
    )
}

/// Every preset at its default parameters.
pub fn all_default() -> Vec<SddeModel> {
    vec![m0(1.0), m1((-1.0f64).exp()), m2(1.0, 0.25, 1.0), m3(1.5), m4()]
}

pub fn by_name(name: &str, params: &HashMap<String, f64>) -> Result<SddeModel> {
    let allowed: &[&str] = match name {
        "m0" => &["a"],
        "m1" => &["b"],
        "m2" => &["a", "b", "r"],
        "m3" => &["c"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!("preset `{name}` has no parameter `{k}`")));
    }
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    Ok(match name {
        "m0" => m0(get("a", 1.0)),
        "m1" => m1(get("b", (-1.0f64).exp())),
        "m2" => m2(get("a", 1.0), get("b", 0.25), get("r", 1.0)),
        "m3" => m3(get("c", 1.5)),
        "m4" => m4(),
        other => return Err(Error::InvalidParameter(format!("unknown preset `{other}`"))),
    })
}
