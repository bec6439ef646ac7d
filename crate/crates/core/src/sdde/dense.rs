//! Fixed-step RK4 for delay equations with a cubic Hermite continuous
//! extension. Delayed values are read from the dense output; when a lag
//! falls inside the step being computed, the step is resolved by
//! fixed-point iteration on its end data, with step halving as fallback.

use std::cell::Cell;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{euclid, History, Piece, Segment, Side, N_NORM};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    /// `h = r / steps_per_delay`.
    pub steps_per_delay: usize,
    pub fp_tol: f64,
    pub max_fp_iter: usize,
    pub max_halvings: usize,
    pub blowup_bound: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            steps_per_delay: 64,
            fp_tol: 1e-12,
            max_fp_iter: 25,
            max_halvings: 8,
            blowup_bound: 1e8,
        }
    }
}

impl StepControl {
    pub fn with_steps(steps_per_delay: usize) -> Self {
        Self {
            steps_per_delay,
            ..Self::default()
        }
    }

    pub fn step(&self, r: f64) -> f64 {
        r / self.steps_per_delay as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_delay == 0 {
            return Err(Error::InvalidParameter("steps_per_delay must be positive".into()));
        }
        if !(self.fp_tol > 0.0) || !(self.blowup_bound > 0.0) {
            return Err(Error::InvalidParameter("fp_tol and blowup_bound must be positive".into()));
        }
        Ok(())
    }
}

/// A solution on `[-r, T]`: the initial segment followed by Hermite steps.
#[derive(Clone, Debug)]
pub struct DenseOutput {
    dim: usize,
    history: Segment,
    t: Vec<f64>,
    y: Vec<f64>,
    /// Node derivatives; `f[0]` is the right derivative at `t = 0`.
    f: Vec<f64>,
}

impl DenseOutput {
    fn new(history: Segment) -> Self {
        let dim = history.dim();
        let y0 = history.node_value(history.mesh().len() - 1);
        Self {
            dim,
            t: vec![0.0],
            y: y0.as_slice().to_vec(),
            f: vec![0.0; dim],
            history,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_delay(&self) -> f64 {
        self.history.r()
    }

    pub fn history(&self) -> &Segment {
        &self.history
    }

    pub fn end_time(&self) -> f64 {
        *self.t.last().expect("at least one node")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn node_value(&self, k: usize) -> &[f64] {
        &self.y[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_deriv(&self, k: usize) -> &[f64] {
        &self.f[k * self.dim..(k + 1) * self.dim]
    }

    fn piece(&self, k: usize) -> Piece<'_> {
        Piece {
            t0: self.t[k],
            t1: self.t[k + 1],
            y0: self.node_value(k),
            d0: self.node_deriv(k),
            y1: self.node_value(k + 1),
            d1: self.node_deriv(k + 1),
        }
    }

    /// Step index containing `time > 0`, right-closed on node ties when
    /// `side` is `Left`.
    fn locate(&self, time: f64, side: Side) -> usize {
        let k = match side {
            Side::Right => self.t.partition_point(|&x| x <= time),
            Side::Left => self.t.partition_point(|&x| x < time),
        };
        k.saturating_sub(1).min(self.t.len().saturating_sub(2))
    }

    fn check_time(&self, time: f64) -> Result<()> {
        let (lo, hi) = (-self.max_delay(), self.end_time());
        let tol = 1e-9 * self.max_delay().max(hi.abs()).max(1.0);
        if time.is_nan() || time < lo - tol || time > hi + tol {
            return Err(Error::TimeOutOfRange { t: time, lo, hi });
        }
        Ok(())
    }

    pub(crate) fn value_into(&self, time: f64, out: &mut [f64]) {
        if time <= 0.0 || self.t.len() < 2 {
            let v = self.history.value(time.min(0.0));
            out.copy_from_slice(v.as_slice());
        } else {
            let time = time.min(self.end_time());
            self.piece(self.locate(time, Side::Right)).value_into(time, out);
        }
    }

    pub fn value(&self, time: f64) -> Result<DVector<f64>> {
        self.check_time(time)?;
        let mut out = DVector::zeros(self.dim);
        self.value_into(time, out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn deriv_unchecked(&self, time: f64, side: Side) -> DVector<f64> {
        if time < 0.0 || (time == 0.0 && side == Side::Left) || self.t.len() < 2 {
            if time >= 0.0 && self.t.len() < 2 && side == Side::Right {
                return DVector::from_column_slice(self.node_deriv(0));
            }
            return self
                .history
                .deriv_one_sided(time.clamp(-self.max_delay(), 0.0), side)
                .expect("clamped into the history domain");
        }
        let time = time.min(self.end_time());
        let mut out = DVector::zeros(self.dim);
        self.piece(self.locate(time, side)).deriv_into(time, out.as_mut_slice());
        out
    }

    pub fn deriv(&self, time: f64, side: Side) -> Result<DVector<f64>> {
        self.check_time(time)?;
        Ok(self.deriv_unchecked(time, side))
    }

    /// `(sup |y|, sup |ẏ|)` over `[a, b]`.
    pub fn sup_norms(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        self.check_time(a)?;
        self.check_time(b)?;
        let mut acc = (0.0f64, 0.0f64);
        let mut fold = |(c, d): (f64, f64)| {
            acc.0 = acc.0.max(c);
            acc.1 = acc.1.max(d);
        };
        if a < 0.0 {
            let (ha, hb) = (a.max(-self.max_delay()), b.min(0.0));
            let mesh = self.history.mesh();
            for k in self.history.locate(ha)..mesh.len() - 1 {
                let (m0, m1) = (mesh[k], mesh[k + 1]);
                if m0 >= hb {
                    break;
                }
                let (ua, ub) = ((ha.max(m0) - m0) / (m1 - m0), (hb.min(m1) - m0) / (m1 - m0));
                fold(self.history.piece(k).sup_norms(ua, ub, N_NORM));
            }
        }
        if b > 0.0 && self.t.len() > 1 {
            let (sa, sb) = (a.max(0.0), b.min(self.end_time()));
            for k in self.locate(sa, Side::Right)..self.t.len() - 1 {
                let (t0, t1) = (self.t[k], self.t[k + 1]);
                if t0 >= sb {
                    break;
                }
                let (ua, ub) = ((sa.max(t0) - t0) / (t1 - t0), (sb.min(t1) - t0) / (t1 - t0));
                fold(self.piece(k).sup_norms(ua, ub, N_NORM));
            }
        }
        Ok(acc)
    }

    /// The segment `s ↦ y(t + s)` with breakpoints at every step boundary in
    /// `[t − r, t]`.
    pub fn window_segment(&self, t: f64) -> Result<Segment> {
        let r = self.max_delay();
        if t < -1e-12 || t > self.end_time() + 1e-9 * self.end_time().max(1.0) {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.end_time(),
            });
        }
        let t = t.clamp(0.0, self.end_time());
        let a = t - r;
        // smallest node spacing is h / 2^max_halvings; snap far below that
        let snap = 1e-10 * r;
        let mut times: Vec<f64> = vec![a];
        if a < 0.0 {
            for &m in self.history.mesh() {
                let time = m;
                if time > a + snap && time < t - snap && time <= 0.0 {
                    times.push(time);
                }
            }
        }
        for &node in &self.t {
            if node > 0.0 && node > a + snap && node < t - snap {
                times.push(node);
            }
        }
        times.push(t);
        let n = self.dim;
        let m = times.len();
        let mut values = vec![0.0; m * n];
        let mut d_right = vec![0.0; m * n];
        let mut d_left = vec![0.0; m * n];
        for (k, &time) in times.iter().enumerate() {
            self.value_into(time, &mut values[k * n..(k + 1) * n]);
            let dr = if k + 1 == m { self.deriv_unchecked(time, Side::Left) } else { self.deriv_unchecked(time, Side::Right) };
            let dl = if k == 0 { dr.clone() } else { self.deriv_unchecked(time, Side::Left) };
            d_right[k * n..(k + 1) * n].copy_from_slice(dr.as_slice());
            d_left[k * n..(k + 1) * n].copy_from_slice(dl.as_slice());
        }
        let mut mesh: Vec<f64> = times.iter().map(|&time| time - t).collect();
        mesh[0] = -r;
        mesh[m - 1] = 0.0;
        Segment::from_parts(r, n, mesh, values, d_right, d_left)
    }

    fn push(&mut self, t: f64, y: &[f64], f: &[f64]) {
        self.t.push(t);
        self.y.extend_from_slice(y);
        self.f.extend_from_slice(f);
    }

    fn last_norm(&self) -> f64 {
        euclid(self.node_value(self.t.len() - 1))
    }
}

/// The segment `s ↦ y(t + s)` read directly from a dense output.
#[derive(Clone, Copy)]
pub struct DenseView<'a> {
    pub dense: &'a DenseOutput,
    pub t: f64,
}

impl History for DenseView<'_> {
    fn max_delay(&self) -> f64 {
        self.dense.max_delay()
    }

    fn dim(&self) -> usize {
        self.dense.dim
    }

    fn value(&self, s: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dense.dim);
        self.dense.value_into(self.t + s.clamp(-self.max_delay(), 0.0), out.as_mut_slice());
        out
    }

    fn deriv(&self, s: f64) -> DVector<f64> {
        let side = if s >= 0.0 { Side::Left } else { Side::Right };
        self.dense.deriv_unchecked(self.t + s.clamp(-self.max_delay(), 0.0), side)
    }
}

/// The right-hand side of a delay equation, evaluated on a stage.
pub(crate) trait DelayRhs: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, state: &StageState<'_>) -> Result<DVector<f64>>;
}

#[derive(Clone, Debug)]
struct Provisional {
    t0: f64,
    t1: f64,
    y0: Vec<f64>,
    f0: Vec<f64>,
    y1: Vec<f64>,
    f1: Vec<f64>,
}

impl Provisional {
    fn piece(&self) -> Piece<'_> {
        Piece {
            t0: self.t0,
            t1: self.t1,
            y0: &self.y0,
            d0: &self.f0,
            y1: &self.y1,
            d1: &self.f1,
        }
    }
}

/// What a right-hand side sees at a stage: the committed dense output, the
/// provisional interpolant of the current step and the stage value.
pub(crate) struct StageState<'a> {
    dense: &'a DenseOutput,
    prov: Option<&'a Provisional>,
    t: f64,
    y: &'a [f64],
    touched: &'a Cell<bool>,
}

impl StageState<'_> {
    pub fn current(&self) -> DVector<f64> {
        DVector::from_column_slice(self.y)
    }

    fn is_now(&self, time: f64) -> bool {
        (time - self.t).abs() <= 1e-14 * self.t.abs().max(1.0)
    }

    /// Solution value at a past time `≤ t`.
    pub fn value_at(&self, time: f64) -> DVector<f64> {
        if self.is_now(time) {
            return self.current();
        }
        let mut out = DVector::zeros(self.y.len());
        match self.prov {
            Some(p) if time > self.dense.end_time() => {
                self.touched.set(true);
                p.piece().value_into(time.min(p.t1), out.as_mut_slice());
            }
            _ => self.dense.value_into(time, out.as_mut_slice()),
        }
        out
    }

    pub fn deriv_at(&self, time: f64, side: Side) -> DVector<f64> {
        match self.prov {
            Some(p) if time > self.dense.end_time() || (time == self.dense.end_time() && side == Side::Right && time > 0.0) => {
                self.touched.set(true);
                let mut out = DVector::zeros(self.y.len());
                p.piece().deriv_into(time.min(p.t1), out.as_mut_slice());
                out
            }
            _ => self.dense.deriv_unchecked(time, side),
        }
    }

    /// The current segment `s ↦ y(t + s)` as a history view.
    pub fn segment(&self) -> StageSegment<'_> {
        StageSegment { state: self }
    }
}

pub(crate) struct StageSegment<'a> {
    state: &'a StageState<'a>,
}

impl History for StageSegment<'_> {
    fn max_delay(&self) -> f64 {
        self.state.dense.max_delay()
    }

    fn dim(&self) -> usize {
        self.state.y.len()
    }

    fn value(&self, s: f64) -> DVector<f64> {
        self.state.value_at(self.state.t + s.min(0.0))
    }

    fn deriv(&self, s: f64) -> DVector<f64> {
        let side = if s >= 0.0 { Side::Left } else { Side::Right };
        self.state.deriv_at(self.state.t + s.min(0.0), side)
    }
}

/// Result of an integration: the dense output and, if the divergence guard
/// fired, the time at which it did.
pub(crate) struct Integration {
    pub dense: DenseOutput,
    pub blowup: Option<(f64, f64)>,
}

pub(crate) fn integrate_rhs(
    rhs: &dyn DelayRhs,
    history: Segment,
    horizon: f64,
    ctrl: &StepControl,
) -> Result<Integration> {
    ctrl.validate()?;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be non-negative")));
    }
    if history.dim() != rhs.dim() {
        return Err(Error::DimensionMismatch {
            expected: rhs.dim(),
            got: history.dim(),
        });
    }
    let h = ctrl.step(history.r());
    let mut solver = Solver {
        rhs,
        ctrl,
        dense: DenseOutput::new(history),
    };
    let f0 = {
        let touched = Cell::new(false);
        let y0 = solver.dense.node_value(0).to_vec();
        let state = StageState {
            dense: &solver.dense,
            prov: None,
            t: 0.0,
            y: &y0,
            touched: &touched,
        };
        rhs.eval(0.0, &state)?
    };
    solver.dense.f[..f0.len()].copy_from_slice(f0.as_slice());

    let n_steps = (horizon / h - 1e-9).ceil().max(0.0) as usize;
    let mut blowup = None;
    for i in 0..n_steps {
        let t0 = solver.dense.end_time();
        let t1 = if i + 1 == n_steps { horizon } else { (i + 1) as f64 * h };
        match solver.advance(t0, t1, 0) {
            Ok(()) => {}
            Err(Error::BlowUp { t, norm }) => {
                blowup = Some((t, norm));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Integration {
        dense: solver.dense,
        blowup,
    })
}

struct Solver<'a> {
    rhs: &'a dyn DelayRhs,
    ctrl: &'a StepControl,
    dense: DenseOutput,
}

impl Solver<'_> {
    fn advance(&mut self, t0: f64, t1: f64, depth: usize) -> Result<()> {
        match self.try_step(t0, t1) {
            Ok((y1, f1)) => {
                self.dense.push(t1, &y1, &f1);
                let norm = self.dense.last_norm();
                if !norm.is_finite() || norm > self.ctrl.blowup_bound {
                    return Err(Error::BlowUp { t: t1, norm });
                }
                Ok(())
            }
            Err(Error::NonConvergence { .. }) if depth < self.ctrl.max_halvings => {
                let mid = 0.5 * (t0 + t1);
                self.advance(t0, mid, depth + 1)?;
                self.advance(mid, t1, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    fn stage(&self, prov: &Provisional, touched: &Cell<bool>, t: f64, y: &[f64]) -> Result<DVector<f64>> {
        let state = StageState {
            dense: &self.dense,
            prov: Some(prov),
            t,
            y,
            touched,
        };
        self.rhs.eval(t, &state)
    }

    fn try_step(&self, t0: f64, t1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = t1 - t0;
        let last = self.dense.t.len() - 1;
        let y0 = DVector::from_column_slice(self.dense.node_value(last));
        let k1 = DVector::from_column_slice(self.dense.node_deriv(last));
        let (mut y1g, mut f1g) = if last >= 1 {
            let p = self.dense.piece(last - 1);
            let (mut y, mut f) = (vec![0.0; y0.len()], vec![0.0; y0.len()]);
            p.value_into(t1, &mut y);
            p.deriv_into(t1, &mut f);
            (y, f)
        } else {
            ((&y0 + h * &k1).as_slice().to_vec(), k1.as_slice().to_vec())
        };
        let tm = t0 + 0.5 * h;
        for _ in 0..self.ctrl.max_fp_iter {
            let prov = Provisional {
                t0,
                t1,
                y0: y0.as_slice().to_vec(),
                f0: k1.as_slice().to_vec(),
                y1: y1g.clone(),
                f1: f1g.clone(),
            };
            let touched = Cell::new(false);
            let k2 = self.stage(&prov, &touched, tm, (&y0 + 0.5 * h * &k1).as_slice())?;
            let k3 = self.stage(&prov, &touched, tm, (&y0 + 0.5 * h * &k2).as_slice())?;
            let k4 = self.stage(&prov, &touched, t1, (&y0 + h * &k3).as_slice())?;
            let y1 = &y0 + (h / 6.0) * (&k1 + 2.0 * &k2 + 2.0 * &k3 + &k4);
            if y1.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { t: t1, norm: f64::INFINITY });
            }
            let f1 = self.stage(&prov, &touched, t1, y1.as_slice())?;
            if !touched.get() {
                return Ok((y1.as_slice().to_vec(), f1.as_slice().to_vec()));
            }
            let dy = euclid((&y1 - DVector::from_column_slice(&y1g)).as_slice());
            let df = h * euclid((&f1 - DVector::from_column_slice(&f1g)).as_slice());
            y1g = y1.as_slice().to_vec();
            f1g = f1.as_slice().to_vec();
            if dy.max(df) <= self.ctrl.fp_tol * (1.0 + y1.norm()) {
                return Ok((y1g, f1g));
            }
        }
        Err(Error::NonConvergence { t: t0 })
    }
}
