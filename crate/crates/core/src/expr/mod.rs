//! A small expression language for vector fields `F(θ, y₁, y₂)` and delay
//! functionals `τ(θ, x)`, with exact symbolic differentiation.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" [ "-" ] integer ] ;
//! primary = number | variable | param | call | "(" expr ")" ;
//! call    = ("sin" | "cos" | "exp" | "tanh") "(" expr ")"
//!         | "abs_smooth" "(" expr (";" | ",") number ")" ;
//! variable = "th" k | "y1_" k | "y2_" k | "x0_" k | "xm_" k "@" signed_number | "s" ;
//! ```
//!
//! Indices `k` are 1-based. `th k` is the angle `2π θ_k` of the k-th driving
//! coordinate and may only appear inside `sin`/`cos`. `y1_k`, `y2_k` are the
//! current and delayed states (vector fields only); `x0_k` and `xm_k@s` are
//! segment values at `0` and at the fixed lag `s ∈ [-r, 0]` (delays only);
//! `s` is the history argument in initial-data expressions. Named parameters
//! are substituted as constants at parse time.

mod diff;
mod forms;
mod parse;
mod print;

pub use diff::diff;
pub use forms::{DelayForm, DerivativeMode, ExprField};
pub use parse::{parse, parse_with};

use crate::error::{Error, Result};

/// Threshold below which a denominator is treated as vanishing.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Var {
    /// Driving angle `2π θ_i`.
    Phase(usize),
    /// `y1[i]`: current state.
    Current(usize),
    /// `y2[i]`: delayed state.
    Delayed(usize),
    /// `x0[i]`: segment value at 0.
    SegZero(usize),
    /// `xm[i]@s`: segment value at a fixed lag.
    SegLag(usize, f64),
    /// History argument `s` of an initial-data expression.
    S,
}

impl Var {
    pub fn name(&self) -> String {
        match self {
            Var::Phase(i) => format!("th{}", i + 1),
            Var::Current(i) => format!("y1_{}", i + 1),
            Var::Delayed(i) => format!("y2_{}", i + 1),
            Var::SegZero(i) => format!("x0_{}", i + 1),
            Var::SegLag(i, s) => format!("xm_{}@{}", i + 1, s),
            Var::S => "s".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
        }
    }

    fn apply(&self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division; fails at evaluation if `|den| < DIV_GUARD`.
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    /// `sqrt(v² + ε²)`.
    AbsSmooth(Box<Expr>, f64),
}

/// Which variables an expression may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    Field,
    Delay,
    Initial,
}

/// Variable values for evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env<'a> {
    /// Driving angles `2π θ`.
    pub angles: &'a [f64],
    pub current: &'a [f64],
    pub delayed: &'a [f64],
    /// `(lag, value)` pairs; lag 0 serves `x0`.
    pub seg_points: &'a [(f64, Vec<f64>)],
    pub s: Option<f64>,
}

impl Env<'_> {
    fn lookup(&self, v: &Var) -> Option<f64> {
        match *v {
            Var::Phase(i) => self.angles.get(i).copied(),
            Var::Current(i) => self.current.get(i).copied(),
            Var::Delayed(i) => self.delayed.get(i).copied(),
            Var::SegZero(i) => self.seg_point(0.0, i),
            Var::SegLag(i, s) => self.seg_point(s, i),
            Var::S => self.s,
        }
    }

    fn seg_point(&self, lag: f64, i: usize) -> Option<f64> {
        self.seg_points
            .iter()
            .find(|(s, _)| *s == lag)
            .and_then(|(_, v)| v.get(i).copied())
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => env.lookup(v).ok_or_else(|| Error::Unbound(v.name()))?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Expr::Div(a, b) => {
                let den = b.eval(env)?;
                if den.abs() < DIV_GUARD || den.is_nan() {
                    return Err(Error::GuardedDivision(den.abs()));
                }
                a.eval(env)? / den
            }
            Expr::Pow(a, n) => a.eval(env)?.powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(env)?),
            Expr::AbsSmooth(a, eps) => {
                let v = a.eval(env)?;
                (v * v + eps * eps).sqrt()
            }
        })
    }

    /// Visits every variable occurrence with a flag telling whether it sits
    /// inside a `sin`/`cos` argument.
    pub fn visit_vars(&self, f: &mut impl FnMut(&Var, bool)) {
        self.visit_inner(false, f)
    }

    fn visit_inner(&self, in_trig: bool, f: &mut impl FnMut(&Var, bool)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(v, in_trig),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::AbsSmooth(a, _) => a.visit_inner(in_trig, f),
            Expr::Call(func, a) => {
                let trig = in_trig || matches!(func, Func::Sin | Func::Cos);
                a.visit_inner(trig, f)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit_inner(in_trig, f);
                b.visit_inner(in_trig, f);
            }
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        self.visit_vars(&mut |v, _| {
            if !out.contains(v) {
                out.push(*v)
            }
        });
        out
    }

    /// Checks variable classes and index ranges for a context.
    pub fn validate(&self, ctx: Context, dim: usize, phase_dim: usize, r: f64) -> Result<()> {
        let mut err = None;
        self.visit_vars(&mut |v, in_trig| {
            if err.is_some() {
                return;
            }
            let (allowed, idx, bound) = match *v {
                Var::Phase(i) => (ctx != Context::Initial, i, phase_dim),
                Var::Current(i) | Var::Delayed(i) => (ctx == Context::Field, i, dim),
                Var::SegZero(i) => (ctx == Context::Delay, i, dim),
                Var::SegLag(i, s) => {
                    if !(-r - 1e-12..=0.0).contains(&s) {
                        err = Some(Error::InvalidParameter(format!(
                            "lag {s} of {} outside [-{r}, 0]",
                            v.name()
                        )));
                        return;
                    }
                    (ctx == Context::Delay, i, dim)
                }
                Var::S => (ctx == Context::Initial, 0, 1),
            };
            if !allowed {
                err = Some(Error::ForbiddenVariable(v.name()));
            } else if idx >= bound {
                err = Some(Error::InvalidParameter(format!(
                    "index of {} exceeds dimension {bound}",
                    v.name()
                )));
            } else if matches!(v, Var::Phase(_)) && !in_trig {
                err = Some(Error::InvalidParameter(format!(
                    "{} must appear inside sin/cos",
                    v.name()
                )));
            }
        });
        err.map_or(Ok(()), Err)
    }
}

// Simplifying constructors used by the differentiator.

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, b) if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        (Expr::Const(1.0), b) => b,
        (a, Expr::Const(1.0)) => a,
        (Expr::Const(-1.0), b) => neg(b),
        (a, Expr::Const(-1.0)) => neg(a),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if a.is_zero() => Expr::Const(0.0),
        (a, Expr::Const(1.0)) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, n: i32) -> Expr {
    match (a, n) {
        (_, 0) => Expr::Const(1.0),
        (a, 1) => a,
        (Expr::Const(c), n) => Expr::Const(c.powi(n)),
        (a, n) => Expr::Pow(Box::new(a), n),
    }
}

pub(crate) fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_arithmetic() {
        let env = Env::default();
        assert_eq!(parse("2+3*4").unwrap().eval(&env).unwrap(), 14.0);
        assert_eq!(parse("sin(0)").unwrap().eval(&env).unwrap(), 0.0);
        assert_eq!(parse("2^-2").unwrap().eval(&env).unwrap(), 0.25);
        let a = parse("abs_smooth(0; 0.5)").unwrap().eval(&env).unwrap();
        assert_eq!(a, 0.5);
    }

    #[test]
    fn guarded_division() {
        let e = parse("1/(x0_1)").unwrap();
        let pts = vec![(0.0, vec![0.0])];
        let env = Env {
            seg_points: &pts,
            ..Env::default()
        };
        assert!(matches!(e.eval(&env), Err(Error::GuardedDivision(_))));
    }

    #[test]
    fn unbound_variable() {
        let e = parse("y1_1 + 1").unwrap();
        assert!(matches!(e.eval(&Env::default()), Err(Error::Unbound(n)) if n == "y1_1"));
    }

    #[test]
    fn validation_by_context() {
        let f = parse("-y1_1 + sin(th1)*y2_1").unwrap();
        assert!(f.validate(Context::Field, 1, 1, 1.0).is_ok());
        assert!(f.validate(Context::Delay, 1, 1, 1.0).is_err());
        assert!(f.validate(Context::Field, 1, 0, 1.0).is_err());
        let tau = parse("0.5 + 0.4*tanh(x0_1) + 0.01*xm_1@-0.5").unwrap();
        assert!(tau.validate(Context::Delay, 1, 1, 1.0).is_ok());
        assert!(tau.validate(Context::Field, 1, 1, 1.0).is_err());
        assert!(tau.validate(Context::Delay, 1, 1, 0.25).is_err());
        let bare = parse("th1*y1_1").unwrap();
        assert!(bare.validate(Context::Field, 1, 1, 1.0).is_err());
        let init = parse("cos(s)").unwrap();
        assert!(init.validate(Context::Initial, 1, 1, 1.0).is_ok());
    }
}
