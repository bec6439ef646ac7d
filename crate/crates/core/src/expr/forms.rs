//! Vector fields and delay functionals defined by DSL expressions.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use super::{diff, Context, Env, Expr, Var};
use crate::driving::Phase;
use crate::error::{Error, Result};
use crate::sdde::{DelayFunctional, DelayGradient, VectorField};
use crate::segment::History;

/// How Jacobians of a DSL field are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Symbolic,
    FiniteDifference,
}

/// Component-wise `F_i(θ, y₁, y₂)`.
#[derive(Clone, Debug)]
pub struct ExprField {
    components: Vec<Expr>,
    mode: DerivativeMode,
    /// `jac_current[i][j] = ∂F_i/∂y1_j`.
    jac_current: Vec<Vec<Expr>>,
    jac_delayed: Vec<Vec<Expr>>,
}

impl ExprField {
    pub fn new(components: Vec<Expr>, phase_dim: usize, r: f64, mode: DerivativeMode) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidParameter("vector field needs a component".into()));
        }
        for c in &components {
            c.validate(Context::Field, n, phase_dim, r)?;
        }
        let jac = |ctor: fn(usize) -> Var| {
            components
                .iter()
                .map(|c| (0..n).map(|j| diff(c, &ctor(j))).collect())
                .collect()
        };
        Ok(Self {
            jac_current: jac(Var::Current),
            jac_delayed: jac(Var::Delayed),
            components,
            mode,
        })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    fn eval_into(&self, angles: &[f64], cur: &[f64], del: &[f64]) -> Result<DVector<f64>> {
        let env = Env {
            angles,
            current: cur,
            delayed: del,
            ..Env::default()
        };
        let vals = self
            .components
            .iter()
            .map(|c| c.eval(&env))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    fn jacobian(
        &self,
        theta: &Phase,
        cur: &DVector<f64>,
        del: &DVector<f64>,
        table: &[Vec<Expr>],
        wrt_delayed: bool,
    ) -> Result<DMatrix<f64>> {
        let n = self.components.len();
        let angles = theta.angles();
        match self.mode {
            DerivativeMode::Symbolic => {
                let env = Env {
                    angles: &angles,
                    current: cur.as_slice(),
                    delayed: del.as_slice(),
                    ..Env::default()
                };
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = table[i][j].eval(&env)?;
                    }
                }
                Ok(m)
            }
            DerivativeMode::FiniteDifference => {
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let base = if wrt_delayed { del } else { cur };
                    let h = 1e-6 * base[j].abs().max(1.0);
                    let (mut p, mut q) = (base.clone(), base.clone());
                    p[j] += h;
                    q[j] -= h;
                    let (fp, fq) = if wrt_delayed {
                        (self.eval_into(&angles, cur.as_slice(), p.as_slice())?, self.eval_into(&angles, cur.as_slice(), q.as_slice())?)
                    } else {
                        (self.eval_into(&angles, p.as_slice(), del.as_slice())?, self.eval_into(&angles, q.as_slice(), del.as_slice())?)
                    };
                    m.set_column(j, &((fp - fq) / (2.0 * h)));
                }
                Ok(m)
            }
        }
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DVector<f64>> {
        self.eval_into(&theta.angles(), current.as_slice(), delayed.as_slice())
    }

    fn d_current(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian(theta, current, delayed, &self.jac_current, false)
    }

    fn d_delayed(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian(theta, current, delayed, &self.jac_delayed, true)
    }
}

/// A delay that reads the segment at finitely many points, or a constant.
#[derive(Clone, Debug)]
pub enum DelayForm {
    Constant(f64),
    Discrete {
        expr: Expr,
        /// Distinct lags read by `expr`, `0` first.
        lags: Vec<f64>,
        /// `grad[k][i] = ∂τ/∂x_i(lags[k])`.
        grad: Vec<Vec<Expr>>,
    },
}

impl DelayForm {
    pub fn constant(tau: f64, r: f64) -> Result<Self> {
        if !(0.0..=r).contains(&tau) {
            return Err(Error::DelayOutOfRange { value: tau, r });
        }
        Ok(DelayForm::Constant(tau))
    }

    pub fn discrete(expr: Expr, dim: usize, phase_dim: usize, r: f64) -> Result<Self> {
        expr.validate(Context::Delay, dim, phase_dim, r)?;
        if let Expr::Const(c) = expr {
            return Self::constant(c, r);
        }
        let mut lags = vec![0.0];
        for v in expr.vars() {
            if let Var::SegLag(_, s) = v {
                if !lags.contains(&s) {
                    lags.push(s);
                }
            }
        }
        let grad = lags
            .iter()
            .map(|&s| {
                (0..dim)
                    .map(|i| {
                        let var = if s == 0.0 { Var::SegZero(i) } else { Var::SegLag(i, s) };
                        // xm_i@0 and x0_i are the same point
                        let mut d = diff(&expr, &var);
                        if s == 0.0 {
                            d = super::add(d, diff(&expr, &Var::SegLag(i, 0.0)));
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        Ok(DelayForm::Discrete { expr, lags, grad })
    }

    fn points(lags: &[f64], x: &dyn History) -> Vec<(f64, Vec<f64>)> {
        lags.iter()
            .map(|&s| (s, x.value(s).as_slice().to_vec()))
            .collect()
    }
}

impl DelayFunctional for DelayForm {
    fn eval(&self, theta: &Phase, x: &dyn History) -> Result<f64> {
        match self {
            DelayForm::Constant(c) => Ok(*c),
            DelayForm::Discrete { expr, lags, .. } => {
                let angles = theta.angles();
                let pts = Self::points(lags, x);
                expr.eval(&Env {
                    angles: &angles,
                    seg_points: &pts,
                    ..Env::default()
                })
            }
        }
    }

    fn gradient(&self, theta: &Phase, x: &dyn History) -> Result<DelayGradient> {
        match self {
            DelayForm::Constant(_) => Ok(DelayGradient::zero()),
            DelayForm::Discrete { lags, grad, .. } => {
                let angles = theta.angles();
                let pts = Self::points(lags, x);
                let env = Env {
                    angles: &angles,
                    seg_points: &pts,
                    ..Env::default()
                };
                let mut terms = Vec::with_capacity(lags.len());
                for (s, row) in lags.iter().zip(grad) {
                    let w = row.iter().map(|e| e.eval(&env)).collect::<Result<Vec<_>>>()?;
                    if w.iter().any(|c| *c != 0.0) {
                        terms.push((*s, RowDVector::from_vec(w)));
                    }
                }
                Ok(DelayGradient { terms })
            }
        }
    }
}
