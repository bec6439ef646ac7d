//! The nonlinear equation `y'(t) = F(ω·t, y(t), y(t − τ(ω·t, y_t)))` and its
//! skew-product semiflow `Π(t, ω, x) = (ω·t, u(t, ω, x))`.

mod dense;
mod trajectory;

pub use dense::{DenseOutput, DenseView, StepControl};
pub(crate) use dense::{integrate_rhs, DelayRhs, StageState};
pub(crate) use trajectory::check_initial;
pub use trajectory::{integrate, omega_limit_sample, semiflow_map, shift_extract, Trajectory};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::driving::{Phase, TorusFlow};
use crate::error::{Error, Result};
use crate::segment::{History, Segment};

/// `F(θ, y₁, y₂)` with its partial Jacobians.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DVector<f64>>;
    /// `D₂F`, derivative in the current state.
    fn d_current(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// `D₃F`, derivative in the delayed state.
    fn d_delayed(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// `τ(θ, x)` with its derivative in `x` as a finite-rank functional.
pub trait DelayFunctional: Send + Sync {
    fn eval(&self, theta: &Phase, x: &dyn History) -> Result<f64>;
    fn gradient(&self, theta: &Phase, x: &dyn History) -> Result<DelayGradient>;
}

/// `φ ↦ Σ_k w_k · φ(s_k)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayGradient {
    pub terms: Vec<(f64, RowDVector<f64>)>,
}

impl DelayGradient {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, w)| w.iter().all(|c| *c == 0.0))
    }

    pub fn apply(&self, phi: &dyn History) -> f64 {
        self.terms
            .iter()
            .map(|(s, w)| (w * phi.value(*s))[(0, 0)])
            .sum()
    }

    /// `‖ℓ‖_{Lin(C,ℝ)} = Σ_k |w_k|`.
    pub fn op_norm(&self) -> f64 {
        self.terms.iter().map(|(_, w)| w.norm()).sum()
    }
}

/// The pair `(F, τ)` over a torus driving flow.
#[derive(Clone)]
pub struct SddeModel {
    name: String,
    dim: usize,
    r: f64,
    driving: TorusFlow,
    field: Arc<dyn VectorField>,
    delay: Arc<dyn DelayFunctional>,
}

impl fmt::Debug for SddeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SddeModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("r", &self.r)
            .field("driving", &self.driving)
            .finish_non_exhaustive()
    }
}

impl SddeModel {
    pub fn new(
        name: impl Into<String>,
        r: f64,
        driving: TorusFlow,
        field: Arc<dyn VectorField>,
        delay: Arc<dyn DelayFunctional>,
    ) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("max delay r = {r} must be positive")));
        }
        Ok(Self {
            name: name.into(),
            dim: field.dim(),
            r,
            driving,
            field,
            delay,
        })
    }

    /// The same equation over another driving flow of equal dimension.
    pub fn with_driving(mut self, driving: TorusFlow) -> Self {
        self.driving = driving;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_delay(&self) -> f64 {
        self.r
    }

    pub fn driving(&self) -> &TorusFlow {
        &self.driving
    }

    pub fn f(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DVector<f64>> {
        self.field.eval(theta, current, delayed)
    }

    pub fn d2f(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.field.d_current(theta, current, delayed)
    }

    pub fn d3f(&self, theta: &Phase, current: &DVector<f64>, delayed: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.field.d_delayed(theta, current, delayed)
    }

    /// `τ(θ, x)`, rejected unless it lies in `[0, r]`.
    pub fn tau(&self, theta: &Phase, x: &dyn History) -> Result<f64> {
        let tau = self.delay.eval(theta, x)?;
        let slack = 1e-12 * self.r.max(1.0);
        if !(tau >= -slack && tau <= self.r + slack) {
            return Err(Error::DelayOutOfRange { value: tau, r: self.r });
        }
        Ok(tau.clamp(0.0, self.r))
    }

    pub fn d2tau(&self, theta: &Phase, x: &dyn History) -> Result<DelayGradient> {
        self.delay.gradient(theta, x)
    }

    /// `F(θ, x(0), x(−τ(θ, x)))`.
    pub fn field_on_segment(&self, theta: &Phase, x: &dyn History) -> Result<DVector<f64>> {
        let tau = self.tau(theta, x)?;
        self.f(theta, &x.value(0.0), &x.value(-tau))
    }

    /// Finite-difference audit of `D₂F`, `D₃F` and `D₂τ` at random probes.
    ///
    /// Returns the worst relative mismatch for the Jacobians and for the
    /// delay gradient.
    pub fn derivative_audit<R: Rng>(&self, rng: &mut R, probes: usize) -> Result<DerivativeAudit> {
        let n = self.dim;
        let h = 1e-6;
        let mut jac_err = 0.0f64;
        let mut tau_err = 0.0f64;
        for _ in 0..probes {
            let theta = Phase::new((0..self.driving.dim()).map(|_| rng.gen::<f64>()).collect());
            let y1 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let y2 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let a = self.d2f(&theta, &y1, &y2)?;
            let b = self.d3f(&theta, &y1, &y2)?;
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = h;
                let fd1 = (self.f(&theta, &(&y1 + &e), &y2)? - self.f(&theta, &(&y1 - &e), &y2)?) / (2.0 * h);
                let fd2 = (self.f(&theta, &y1, &(&y2 + &e))? - self.f(&theta, &y1, &(&y2 - &e))?) / (2.0 * h);
                let scale = |m: &DMatrix<f64>| m.column(j).norm().max(1.0);
                jac_err = jac_err.max((a.column(j) - fd1).norm() / scale(&a));
                jac_err = jac_err.max((b.column(j) - fd2).norm() / scale(&b));
            }
            let amp: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let freq = rng.gen_range(0.5..3.0);
            let x = Segment::from_fn(
                self.r,
                16,
                |s| DVector::from_fn(n, |i, _| amp[i] * (freq * s + i as f64).cos()),
                |s| DVector::from_fn(n, |i, _| -amp[i] * freq * (freq * s + i as f64).sin()),
            )?;
            let v = Segment::from_fn(
                self.r,
                16,
                |s| DVector::from_fn(n, |i, _| (2.0 * s + 0.3 * i as f64).sin()),
                |s| DVector::from_fn(n, |i, _| 2.0 * (2.0 * s + 0.3 * i as f64).cos()),
            )?;
            let ell = self.d2tau(&theta, &x)?;
            let plus = Segment::combine(1.0, &x, h, &v)?;
            let minus = Segment::combine(1.0, &x, -h, &v)?;
            let fd = (self.delay.eval(&theta, &plus)? - self.delay.eval(&theta, &minus)?) / (2.0 * h);
            let sym = ell.apply(&v);
            tau_err = tau_err.max((sym - fd).abs() / sym.abs().max(1.0));
        }
        Ok(DerivativeAudit { jacobian: jac_err, delay: tau_err })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeAudit {
    pub jacobian: f64,
    pub delay: f64,
}

/// Membership test for the compatibility set `C₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Compatibility {
    pub compatible: bool,
    pub residual: f64,
}

/// `|ẋ(0⁻) − F(θ, x(0), x(−τ(θ,x)))|` against `tol`.
pub fn check_compatibility(model: &SddeModel, theta: &Phase, x: &dyn History, tol: f64) -> Result<Compatibility> {
    let rhs = model.field_on_segment(theta, x)?;
    let residual = (x.deriv(0.0) - rhs).norm();
    Ok(Compatibility {
        compatible: residual <= tol,
        residual,
    })
}

/// Scale-aware compatibility tolerance `1e-6·(1 + ‖x‖_W)`.
pub fn default_c0_tol(x: &Segment) -> f64 {
    1e-6 * (1.0 + x.norm_w())
}
