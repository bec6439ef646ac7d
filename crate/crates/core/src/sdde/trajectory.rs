use std::fmt::Write as _;

use nalgebra::DVector;

use super::dense::{integrate_rhs, DelayRhs, DenseOutput, DenseView, StageState, StepControl};
use super::SddeModel;
use crate::driving::Phase;
use crate::error::{Error, Result};
use crate::segment::{Segment, Side};

struct SddeRhs<'a> {
    model: &'a SddeModel,
    theta0: &'a Phase,
}

impl DelayRhs for SddeRhs<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, t: f64, st: &StageState<'_>) -> Result<DVector<f64>> {
        let theta = self.model.driving().advance(self.theta0, t);
        let tau = self.model.tau(&theta, &st.segment())?;
        self.model.f(&theta, &st.current(), &st.value_at(t - tau))
    }
}

/// A solution `y(·, θ₀, x)` on `[-r, T]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    model: SddeModel,
    theta0: Phase,
    dense: DenseOutput,
    horizon: f64,
    blowup: Option<(f64, f64)>,
}

/// Integrates the nonlinear equation from `(θ₀, x)` up to `horizon`.
///
/// A trajectory whose norm exceeds `ctrl.blowup_bound` is truncated and
/// flagged rather than reported as an error.
pub fn integrate(model: &SddeModel, theta0: &Phase, x: &Segment, horizon: f64, ctrl: &StepControl) -> Result<Trajectory> {
    check_initial(model, theta0, x)?;
    let rhs = SddeRhs { model, theta0 };
    let out = integrate_rhs(&rhs, x.clone(), horizon, ctrl)?;
    Ok(Trajectory {
        model: model.clone(),
        theta0: theta0.clone(),
        dense: out.dense,
        horizon,
        blowup: out.blowup,
    })
}

pub(crate) fn check_initial(model: &SddeModel, theta0: &Phase, x: &Segment) -> Result<()> {
    if x.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.dim(),
        });
    }
    if theta0.dim() != model.driving().dim() {
        return Err(Error::DimensionMismatch {
            expected: model.driving().dim(),
            got: theta0.dim(),
        });
    }
    if (x.r() - model.max_delay()).abs() > 1e-12 * model.max_delay() {
        return Err(Error::Incompatible(format!(
            "segment r = {} differs from model r = {}",
            x.r(),
            model.max_delay()
        )));
    }
    Ok(())
}

impl Trajectory {
    pub fn model(&self) -> &SddeModel {
        &self.model
    }

    pub fn theta0(&self) -> &Phase {
        &self.theta0
    }

    pub fn initial(&self) -> &Segment {
        self.dense.history()
    }

    pub fn dense(&self) -> &DenseOutput {
        &self.dense
    }

    /// Requested horizon.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Last time actually reached.
    pub fn end_time(&self) -> f64 {
        self.dense.end_time()
    }

    /// `(t, |y|)` where the divergence guard fired.
    pub fn blowup(&self) -> Option<(f64, f64)> {
        self.blowup
    }

    pub fn is_truncated(&self) -> bool {
        self.blowup.is_some()
    }

    pub fn y(&self, t: f64) -> Result<DVector<f64>> {
        self.dense.value(t)
    }

    pub fn ydot(&self, t: f64, side: Side) -> Result<DVector<f64>> {
        self.dense.deriv(t, side)
    }

    pub fn phase_at(&self, t: f64) -> Phase {
        self.model.driving().advance(&self.theta0, t)
    }

    /// `u(t, θ₀, x)`.
    pub fn segment_at(&self, t: f64) -> Result<Segment> {
        self.dense.window_segment(t)
    }

    /// `u(t)` as a lightweight view, without materializing a segment.
    pub fn view_at(&self, t: f64) -> DenseView<'_> {
        DenseView { dense: &self.dense, t }
    }

    /// `τ(θ₀·t, u(t))` along the solution.
    pub fn realized_delay(&self, t: f64) -> Result<f64> {
        self.model.tau(&self.phase_at(t), &self.view_at(t))
    }

    /// Residual `|ẏ(t⁻) − F(θ₀·t, y(t), y(t − τ))|` at an interior node.
    pub fn node_residual(&self, k: usize) -> Result<f64> {
        let t = self.dense.nodes()[k];
        let rhs = self.model.field_on_segment(&self.phase_at(t), &self.view_at(t))?;
        Ok((DVector::from_column_slice(self.dense.node_deriv(k)) - rhs).norm())
    }

    /// CSV with columns `t, y_1..y_n, tau` at the given output stride.
    pub fn to_csv(&self, stride: f64) -> Result<String> {
        if !(stride > 0.0) {
            return Err(Error::InvalidParameter("output stride must be positive".into()));
        }
        let mut out = String::from("t");
        for i in 1..=self.model.dim() {
            write!(out, ",y_{i}").unwrap();
        }
        out.push_str(",tau\n");
        let end = self.end_time();
        let count = (end / stride + 1e-9).floor() as usize;
        for k in 0..=count {
            let t = (k as f64 * stride).min(end);
            write!(out, "{t}").unwrap();
            for v in self.y(t)?.iter() {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{}", self.realized_delay(t)?).unwrap();
        }
        Ok(out)
    }
}

/// `u(t, θ₀, x)` from an existing trajectory.
pub fn shift_extract(traj: &Trajectory, t: f64) -> Result<Segment> {
    traj.segment_at(t)
}

/// `Π(t, θ₀, x) = (θ₀·t, u(t, θ₀, x))`.
pub fn semiflow_map(model: &SddeModel, theta0: &Phase, x: &Segment, t: f64, ctrl: &StepControl) -> Result<(Phase, Segment)> {
    let traj = integrate(model, theta0, x, t, ctrl)?;
    if let Some((tb, norm)) = traj.blowup() {
        return Err(Error::BlowUp { t: tb, norm });
    }
    Ok((traj.phase_at(t), traj.segment_at(t)?))
}

/// Points `(θ₀·t, u(t))` for `t = t_transient + k·stride` within the sample
/// window, approximating the omega-limit set of `(θ₀, x)`.
pub fn omega_limit_sample(
    model: &SddeModel,
    theta0: &Phase,
    x: &Segment,
    t_transient: f64,
    t_sample: f64,
    stride: f64,
    ctrl: &StepControl,
) -> Result<Vec<(Phase, Segment)>> {
    if !(stride > 0.0) || !(t_transient >= 0.0) || !(t_sample >= 0.0) {
        return Err(Error::InvalidParameter("omega-limit sampling needs t_transient, t_sample ≥ 0 and stride > 0".into()));
    }
    let traj = integrate(model, theta0, x, t_transient + t_sample, ctrl)?;
    if let Some((_, norm)) = traj.blowup() {
        return Err(Error::Unbounded(norm));
    }
    let count = (t_sample / stride + 1e-9).floor() as usize;
    (0..=count)
        .map(|k| {
            let t = t_transient + k as f64 * stride;
            Ok((traj.phase_at(t), traj.segment_at(t)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use nalgebra::dvector;

    #[test]
    fn m0_matches_closed_form() {
        let m0 = presets::m0(1.0);
        let traj = integrate(&m0, &Phase::zeros(1), &Segment::constant(1.0, dvector![1.0]), 5.0, &StepControl::default()).unwrap();
        assert!((traj.y(5.0).unwrap()[0] - (-5.0f64).exp()).abs() < 1e-7);
        assert!(!traj.is_truncated());
    }

    #[test]
    fn semiflow_at_one_is_exponential() {
        let m0 = presets::m0(1.0);
        let (th, seg) = semiflow_map(&m0, &Phase::new(vec![0.3]), &Segment::constant(1.0, dvector![1.0]), 1.0, &StepControl::default()).unwrap();
        assert!((th.coords()[0] - 0.3).abs() < 1e-15);
        for k in 0..10 {
            let s = -(k as f64) / 9.0;
            assert!((seg.eval(s).unwrap()[0] - (-(1.0 + s)).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_is_preserved_exactly() {
        for model in presets::all_default() {
            if model.name() == "m3" {
                continue;
            }
            let th = Phase::zeros(model.driving().dim());
            let traj = integrate(&model, &th, &Segment::zeros(1.0, model.dim()), 3.0, &StepControl::default()).unwrap();
            for k in 0..traj.dense().nodes().len() {
                assert!(traj.dense().node_value(k).iter().all(|v| *v == 0.0), "{}", model.name());
            }
        }
    }

    #[test]
    fn shift_extract_endpoints() {
        let m2 = presets::m2(1.0, 0.25, 1.0);
        let x = Segment::from_fn(1.0, 8, |s| dvector![0.5 + 0.2 * s], |_| dvector![0.2]).unwrap();
        let traj = integrate(&m2, &Phase::zeros(1), &x, 2.5, &StepControl::default()).unwrap();
        let u0 = traj.segment_at(0.0).unwrap();
        for &s in x.mesh() {
            assert!((u0.eval(s).unwrap() - x.eval(s).unwrap()).norm() < 1e-14);
        }
        let ut = traj.segment_at(2.5).unwrap();
        assert_eq!(ut.eval(0.0).unwrap(), traj.y(2.5).unwrap());
        assert!(traj.segment_at(2.6).is_err());
    }

    #[test]
    fn residual_small_at_nodes() {
        let m2 = presets::m2(1.0, 0.25, 1.0);
        let traj = integrate(&m2, &Phase::zeros(1), &Segment::constant(1.0, dvector![0.4]), 3.0, &StepControl::default()).unwrap();
        for k in 1..traj.dense().nodes().len() {
            assert!(traj.node_residual(k).unwrap() < 1e-12);
        }
    }

    #[test]
    fn blowup_is_flagged() {
        let model = presets::from_dsl("grow", 1, 1.0, crate::driving::TorusFlow::periodic(1.0), &["y1_1^2"], presets::DelaySpec::Constant(1.0), &Default::default()).unwrap();
        let traj = integrate(&model, &Phase::zeros(1), &Segment::constant(1.0, dvector![1.0]), 3.0, &StepControl::default()).unwrap();
        assert!(traj.is_truncated());
        assert!(traj.end_time() < 1.2, "{}", traj.end_time());
        assert!(semiflow_map(&model, &Phase::zeros(1), &Segment::constant(1.0, dvector![1.0]), 3.0, &StepControl::default()).is_err());
    }

    #[test]
    fn csv_columns() {
        let m0 = presets::m0(1.0);
        let traj = integrate(&m0, &Phase::zeros(1), &Segment::constant(1.0, dvector![1.0]), 1.0, &StepControl::default()).unwrap();
        let csv = traj.to_csv(0.5).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t,y_1,tau");
        assert_eq!(lines.len(), 4);
    }
}
