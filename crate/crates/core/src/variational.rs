//! The linearized equation `ż(t) = L(Π(t, θ, x̄)) z_t` along a reference
//! solution and the propagators it defines.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::driving::Phase;
use crate::error::{Error, Result};
use crate::sdde::{
    check_compatibility, default_c0_tol, integrate, integrate_rhs, DelayGradient, DelayRhs, DenseOutput, SddeModel,
    StageState, StepControl, Trajectory,
};
use crate::segment::{History, Segment};

/// `L(θ, x̄)` with its data evaluated once.
#[derive(Clone, Debug)]
pub struct FrozenL {
    pub theta: Phase,
    pub tau: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `x̄'(−τ)`.
    pub d: DVector<f64>,
    pub ell: DelayGradient,
    /// `L φ = Σ_p M_p φ(s_p)` with coincident lags merged.
    terms: Vec<(f64, DMatrix<f64>)>,
}

impl FrozenL {
    fn assemble(model: &SddeModel, theta: &Phase, ubar: &dyn History) -> Result<Self> {
        let tau = model.tau(theta, ubar)?;
        let (x0, xl) = (ubar.value(0.0), ubar.value(-tau));
        let a = model.d2f(theta, &x0, &xl)?;
        let b = model.d3f(theta, &x0, &xl)?;
        let d = ubar.deriv(-tau);
        let ell = model.d2tau(theta, ubar)?;
        let mut terms: Vec<(f64, DMatrix<f64>)> = Vec::new();
        let mut push = |s: f64, m: DMatrix<f64>| match terms.iter_mut().find(|(q, _)| *q == s) {
            Some((_, acc)) => *acc += m,
            None => terms.push((s, m)),
        };
        push(0.0, a.clone());
        push(-tau, b.clone());
        let bd = &b * &d;
        for (s, w) in &ell.terms {
            push(*s, -(&bd * w));
        }
        terms.retain(|(_, m)| m.iter().any(|c| *c != 0.0));
        Ok(Self {
            theta: theta.clone(),
            tau,
            a,
            b,
            d,
            ell,
            terms,
        })
    }

    /// `A φ(0) + B φ(−τ) − B x̄'(−τ) (ℓ φ)`.
    pub fn apply(&self, phi: &dyn History) -> DVector<f64> {
        let mut out = &self.a * phi.value(0.0) + &self.b * phi.value(-self.tau);
        out -= &self.b * &self.d * self.ell.apply(phi);
        out
    }

    /// `Σ_p ‖M_p‖₂`, an upper bound for `‖L‖_{Lin(C, ℝⁿ)}`, exact when `n = 1`.
    pub fn op_norm_bound(&self) -> f64 {
        self.terms.iter().map(|(_, m)| spectral_norm(m)).sum()
    }

    pub fn terms(&self) -> &[(f64, DMatrix<f64>)] {
        &self.terms
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.len() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `L(θ, x̄)`, refused unless `(θ, x̄)` is in the compatibility set.
pub fn build_l(model: &SddeModel, theta: &Phase, ubar: &dyn History, tol: f64) -> Result<FrozenL> {
    let c = check_compatibility(model, theta, ubar, tol)?;
    if !c.compatible {
        return Err(Error::NotCompatible { residual: c.residual, tol });
    }
    FrozenL::assemble(model, theta, ubar)
}

/// `L(Π(t))` tabulated along a reference on the half-step grid used by RK4.
pub struct Linearization<'a> {
    reference: &'a Trajectory,
    ctrl: StepControl,
    spacing: f64,
    table: Vec<FrozenL>,
}

impl<'a> Linearization<'a> {
    /// Refuses references whose initial point is not in the compatibility set.
    pub fn new(reference: &'a Trajectory, ctrl: &StepControl) -> Result<Self> {
        if let Some((t, norm)) = reference.blowup() {
            return Err(Error::BlowUp { t, norm });
        }
        let model = reference.model();
        let x = reference.initial();
        let tol = default_c0_tol(x);
        let c = check_compatibility(model, reference.theta0(), x, tol)?;
        if !c.compatible {
            return Err(Error::NotCompatible { residual: c.residual, tol });
        }
        let spacing = 0.5 * ctrl.step(model.max_delay());
        let count = (reference.end_time() / spacing + 1e-9).floor() as usize;
        let table = (0..=count)
            .into_par_iter()
            .map(|k| {
                let t = k as f64 * spacing;
                FrozenL::assemble(model, &reference.phase_at(t), &reference.view_at(t))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reference,
            ctrl: *ctrl,
            spacing,
            table,
        })
    }

    pub fn reference(&self) -> &Trajectory {
        self.reference
    }

    pub fn end_time(&self) -> f64 {
        self.reference.end_time()
    }

    pub fn at(&self, t: f64) -> Result<FrozenL> {
        let idx = t / self.spacing;
        let k = idx.round();
        if (idx - k).abs() < 1e-9 && (k as usize) < self.table.len() {
            return Ok(self.table[k as usize].clone());
        }
        FrozenL::assemble(self.reference.model(), &self.reference.phase_at(t), &self.reference.view_at(t))
    }

    fn at_ref(&self, t: f64) -> Option<&FrozenL> {
        let idx = t / self.spacing;
        let k = idx.round();
        ((idx - k).abs() < 1e-9).then(|| self.table.get(k as usize)).flatten()
    }

    /// `Ĉ₀ = max ‖L(Π(t))‖` over tabulated `t ∈ [a, b]`.
    pub fn c0_hat(&self, a: f64, b: f64) -> f64 {
        let lo = (a / self.spacing - 1e-9).ceil().max(0.0) as usize;
        let hi = ((b / self.spacing + 1e-9).floor() as usize).min(self.table.len() - 1);
        self.table[lo..=hi].iter().map(FrozenL::op_norm_bound).fold(0.0, f64::max)
    }

    /// Solves the variational equation from reference time `t_start` for
    /// `duration`, starting from the segment `v`.
    pub fn propagate(&self, t_start: f64, v: &Segment, duration: f64) -> Result<LinearSolution> {
        let model = self.reference.model();
        if v.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: v.dim(),
            });
        }
        let end = self.end_time();
        if t_start < 0.0 || t_start + duration > end + 1e-9 * end.max(1.0) {
            return Err(Error::TimeOutOfRange {
                t: t_start + duration,
                lo: 0.0,
                hi: end,
            });
        }
        let rhs = VarRhs { lin: self, t_start };
        let out = integrate_rhs(&rhs, v.clone(), duration, &self.ctrl)?;
        if let Some((t, norm)) = out.blowup {
            return Err(Error::BlowUp { t: t_start + t, norm });
        }
        Ok(LinearSolution {
            t_start,
            dense: out.dense,
        })
    }
}

struct VarRhs<'a, 'b> {
    lin: &'b Linearization<'a>,
    t_start: f64,
}

impl DelayRhs for VarRhs<'_, '_> {
    fn dim(&self) -> usize {
        self.lin.reference.model().dim()
    }

    fn eval(&self, t: f64, st: &StageState<'_>) -> Result<DVector<f64>> {
        let owned;
        let frozen = match self.lin.at_ref(self.t_start + t) {
            Some(f) => f,
            None => {
                owned = self.lin.at(self.t_start + t)?;
                &owned
            }
        };
        let mut out = DVector::zeros(self.dim());
        for (s, m) in &frozen.terms {
            out += m * st.value_at(t + s);
        }
        Ok(out)
    }
}

/// `z(t)` on `[−r, T]`, with `t` measured from the start of propagation.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    t_start: f64,
    dense: DenseOutput,
}

impl LinearSolution {
    /// Reference time at which `z_0 = v`.
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dense(&self) -> &DenseOutput {
        &self.dense
    }

    pub fn end_time(&self) -> f64 {
        self.dense.end_time()
    }

    pub fn z(&self, t: f64) -> Result<DVector<f64>> {
        self.dense.value(t)
    }

    /// `w(t) = z_t`.
    pub fn segment_at(&self, t: f64) -> Result<Segment> {
        self.dense.window_segment(t)
    }
}

/// Variational solution along `reference` from `v`, over `[0, horizon]`.
pub fn integrate_variational(reference: &Trajectory, v: &Segment, horizon: f64, ctrl: &StepControl) -> Result<LinearSolution> {
    Linearization::new(reference, ctrl)?.propagate(0.0, v, horizon)
}

/// `q(ε) = (u(t, θ, x + εv) − u(t, θ, x)) / ε` against `w(t, θ, x, v)`.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionalReport {
    pub t: f64,
    pub eps: Vec<f64>,
    /// `‖q(ε) − w(t)‖_W`.
    pub errors: Vec<f64>,
    /// `err(ε_k) / err(ε_{k+1})`.
    pub ratios: Vec<f64>,
    /// `log(ratio) / log(ε_k / ε_{k+1})`.
    pub orders: Vec<f64>,
}

pub fn directional_derivative_check(
    model: &SddeModel,
    theta0: &Phase,
    x: &Segment,
    v: &Segment,
    t: f64,
    eps_list: &[f64],
    ctrl: &StepControl,
) -> Result<DirectionalReport> {
    let base = integrate(model, theta0, x, t, ctrl)?;
    let w = integrate_variational(&base, v, t, ctrl)?.segment_at(t)?;
    let u = base.segment_at(t)?;
    let errors = eps_list
        .par_iter()
        .map(|&eps| {
            let xe = Segment::combine(1.0, x, eps, v)?;
            let pert = integrate(model, theta0, &xe, t, ctrl)?;
            if let Some((tb, norm)) = pert.blowup() {
                return Err(Error::BlowUp { t: tb, norm });
            }
            let q = Segment::combine(1.0 / eps, &pert.segment_at(t)?, -1.0 / eps, &u)?;
            Ok(q.sub(&w)?.norm_w())
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|p| p[0] / p[1]).collect();
    let orders = ratios
        .iter()
        .zip(eps_list.windows(2))
        .map(|(q, e)| q.ln() / (e[0] / e[1]).ln())
        .collect();
    Ok(DirectionalReport {
        t,
        eps: eps_list.to_vec(),
        errors,
        ratios,
        orders,
    })
}

/// `g = F(θ, x(0), x(−τ(θ,x))) − F(θ, x̄(0), x̄(−τ(θ,x̄))) − L(θ, x̄)(x − x̄)`.
pub fn remainder_g(model: &SddeModel, theta: &Phase, xbar: &Segment, x: &Segment) -> Result<DVector<f64>> {
    let frozen = build_l(model, theta, xbar, default_c0_tol(xbar))?;
    let diff = x.sub(xbar)?;
    Ok(model.field_on_segment(theta, x)? - model.field_on_segment(theta, xbar)? - frozen.apply(&diff))
}

/// Reproducible test directions, normalized to `‖v‖_C = 1`: smooth bumps,
/// Fourier modes and random Lipschitz Hermite data, in rotation.
pub fn direction_ensemble(r: f64, dim: usize, count: usize, seed: u64) -> Result<Vec<Segment>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut dir = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        if dir.norm() < 1e-3 {
            dir[0] = 1.0;
        }
        dir.normalize_mut();
        let seg = match k % 3 {
            0 => {
                let c = rng.gen_range(-r..0.0);
                let w = r * rng.gen_range(0.125..0.25);
                Segment::from_fn(
                    r,
                    32,
                    |s| &dir * (-((s - c) / w).powi(2)).exp(),
                    |s| &dir * (-2.0 * (s - c) / (w * w) * (-((s - c) / w).powi(2)).exp()),
                )?
            }
            1 => {
                let freq = 2.0 * std::f64::consts::PI * (k / 3 % 4) as f64 / r;
                let ph = rng.gen_range(0.0..std::f64::consts::TAU);
                Segment::from_fn(r, 32, |s| &dir * (freq * s + ph).cos(), |s| &dir * (-freq * (freq * s + ph).sin()))?
            }
            _ => {
                let m = 8;
                let mesh: Vec<f64> = (0..=m).map(|i| -r + r * i as f64 / m as f64).collect();
                let scale = m as f64 / r;
                let values: Vec<f64> = (0..(m + 1) * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut d_right: Vec<f64> = (0..(m + 1) * dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                let mut d_left: Vec<f64> = (0..(m + 1) * dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                d_left[..dim].copy_from_slice(&d_right[..dim]);
                let last = m * dim;
                d_right[last..].copy_from_slice(&d_left[last..]);
                Segment::from_parts(r, dim, mesh, values, d_right, d_left)?
            }
        };
        let n = seg.norm_c();
        out.push(seg.scale(1.0 / n));
    }
    Ok(out)
}

/// Per-direction checks of the norm inequalities relating the propagators
/// on `C` and on `W^{1,∞}`, on unrenormalized solutions.
#[derive(Clone, Debug, Serialize)]
pub struct NormAudit {
    pub pairs: usize,
    /// `‖w(t)‖_W ≤ (1 + Ĉ₀) sup_{u ∈ [t−2r, t]} |z(u)|`.
    pub violations_i: usize,
    /// `‖w(t)‖_C ≤ Ĉ_r · max_j(‖w_j(t)‖_W / ‖w_j(r)‖_W) · ‖v‖_C`.
    pub violations_iii: usize,
    pub c0_hat: f64,
    pub cr_hat: f64,
    /// Largest left/right ratio seen for each inequality.
    pub worst_ratio_i: f64,
    pub worst_ratio_iii: f64,
}

pub fn audit_norm_inequalities(
    lin: &Linearization<'_>,
    directions: &[Segment],
    t_start: f64,
    duration: f64,
    samples: usize,
) -> Result<NormAudit> {
    let r = lin.reference.model().max_delay();
    if duration < r || samples == 0 {
        return Err(Error::InvalidParameter("audit needs duration ≥ r and at least one sample".into()));
    }
    let c0_hat = lin.c0_hat(t_start, t_start + duration);
    let times: Vec<f64> = (0..samples)
        .map(|k| r + (duration - r) * k as f64 / (samples.max(2) - 1) as f64)
        .collect();
    struct Row {
        vc: f64,
        wr_w: f64,
        wt_c: Vec<f64>,
        wt_w: Vec<f64>,
        sup_z: Vec<f64>,
    }
    let rows = directions
        .par_iter()
        .map(|v| {
            let sol = lin.propagate(t_start, v, duration)?;
            let wr_w = sol.segment_at(r)?.norm_w();
            let mut row = Row {
                vc: v.norm_c(),
                wr_w,
                wt_c: Vec::new(),
                wt_w: Vec::new(),
                sup_z: Vec::new(),
            };
            for &t in &times {
                let (c, w) = sol.segment_at(t)?.norms_with(crate::segment::N_NORM);
                row.wt_c.push(c);
                row.wt_w.push(w);
                row.sup_z.push(sol.dense.sup_norms((t - 2.0 * r).max(-r), t)?.0);
            }
            Ok(row)
        })
        .collect::<Result<Vec<Row>>>()?;
    let cr_hat = rows.iter().map(|row| row.wr_w / row.vc).fold(0.0, f64::max);
    let mut audit = NormAudit {
        pairs: 0,
        violations_i: 0,
        violations_iii: 0,
        c0_hat,
        cr_hat,
        worst_ratio_i: 0.0,
        worst_ratio_iii: 0.0,
    };
    for (i, _) in times.iter().enumerate() {
        let op_w = rows.iter().map(|row| row.wt_w[i] / row.wr_w).fold(0.0, f64::max);
        for row in &rows {
            audit.pairs += 1;
            let ratio_i = row.wt_w[i] / ((1.0 + c0_hat) * row.sup_z[i]);
            let ratio_iii = row.wt_c[i] / (cr_hat * op_w * row.vc);
            if ratio_i.is_finite() {
                audit.worst_ratio_i = audit.worst_ratio_i.max(ratio_i);
            }
            if ratio_iii.is_finite() {
                audit.worst_ratio_iii = audit.worst_ratio_iii.max(ratio_iii);
            }
            if row.wt_w[i] > (1.0 + c0_hat) * row.sup_z[i] {
                audit.violations_i += 1;
            }
            if row.wt_c[i] > cr_hat * op_w * row.vc {
                audit.violations_iii += 1;
            }
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use nalgebra::dvector;

    fn ctrl() -> StepControl {
        StepControl::default()
    }

    #[test]
    fn frozen_l_examples() {
        let th = Phase::zeros(1);
        let phi = Segment::from_fn(1.0, 16, |s| dvector![1.0 + s * s], |s| dvector![2.0 * s]).unwrap();
        let zero = Segment::zeros(1.0, 1);
        let m0 = presets::m0(2.0);
        let l = build_l(&m0, &th, &zero, 1e-9).unwrap();
        assert_eq!(l.apply(&phi)[0], -2.0);
        let m1 = presets::m1(0.5);
        let l = build_l(&m1, &th, &zero, 1e-9).unwrap();
        assert!((l.apply(&phi)[0] + 0.5 * 2.0).abs() < 1e-15);
        let m2 = presets::m2(1.0, 0.25, 1.0);
        let l = build_l(&m2, &th, &zero, 1e-9).unwrap();
        assert_eq!(l.tau, 0.5);
        assert!((l.apply(&phi)[0] - (-1.0 - 0.25 * 1.25)).abs() < 1e-15);
        assert!((l.op_norm_bound() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn build_l_refuses_incompatible() {
        let m0 = presets::m0(1.0);
        let x = Segment::constant(1.0, dvector![1.0]);
        assert!(matches!(build_l(&m0, &Phase::zeros(1), &x, 1e-6), Err(Error::NotCompatible { .. })));
    }

    #[test]
    fn m0_variational_is_decay() {
        let m0 = presets::m0(1.0);
        let reference = integrate(&m0, &Phase::zeros(1), &Segment::zeros(1.0, 1), 5.0, &ctrl()).unwrap();
        let sol = integrate_variational(&reference, &Segment::constant(1.0, dvector![1.0]), 5.0, &ctrl()).unwrap();
        assert!((sol.z(5.0).unwrap()[0] - (-5.0f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn variational_is_linear() {
        let m2 = presets::m2(1.0, 0.25, 1.0);
        let pre = integrate(&m2, &Phase::zeros(1), &Segment::constant(1.0, dvector![0.8]), 2.0, &ctrl()).unwrap();
        let reference = integrate(&m2, &pre.phase_at(2.0), &pre.segment_at(2.0).unwrap(), 4.0, &ctrl()).unwrap();
        let dirs = direction_ensemble(1.0, 1, 2, 3).unwrap();
        let lin = Linearization::new(&reference, &ctrl()).unwrap();
        let s1 = lin.propagate(0.0, &dirs[0], 4.0).unwrap();
        let s2 = lin.propagate(0.0, &dirs[1], 4.0).unwrap();
        let comb = lin.propagate(0.0, &Segment::combine(2.0, &dirs[0], 1.0, &dirs[1]).unwrap(), 4.0).unwrap();
        for k in 1..=20 {
            let t = 0.2 * k as f64;
            let lhs = comb.z(t).unwrap();
            let rhs = 2.0 * s1.z(t).unwrap() + s2.z(t).unwrap();
            assert!((lhs - &rhs).norm() <= 1e-9 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn m2_zero_reference_is_constant_delay_equation() {
        let m2 = presets::m2(1.0, 0.25, 1.0);
        let reference = integrate(&m2, &Phase::zeros(1), &Segment::zeros(1.0, 1), 6.0, &ctrl()).unwrap();
        let v = direction_ensemble(1.0, 1, 1, 9).unwrap().remove(0);
        let sol = integrate_variational(&reference, &v, 6.0, &ctrl()).unwrap();
        let oracle = presets::from_dsl(
            "lin",
            1,
            1.0,
            crate::driving::TorusFlow::periodic(1.0),
            &["-y1_1 - 0.25*y2_1"],
            presets::DelaySpec::Constant(0.5),
            &Default::default(),
        )
        .unwrap();
        let direct = integrate(&oracle, &Phase::zeros(1), &v, 6.0, &ctrl()).unwrap();
        for k in 0..=30 {
            let t = 0.2 * k as f64;
            assert!((sol.z(t).unwrap() - direct.y(t).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn remainder_examples() {
        let th = Phase::zeros(1);
        let m1 = presets::m1(0.7);
        let xbar = Segment::zeros(1.0, 1);
        let x = Segment::from_fn(1.0, 8, |s| dvector![s.sin()], |s| dvector![s.cos()]).unwrap();
        assert!(remainder_g(&m1, &th, &xbar, &x).unwrap().norm() < 1e-15);
        assert_eq!(remainder_g(&m1, &th, &xbar, &xbar).unwrap().norm(), 0.0);
    }

    #[test]
    fn ensemble_is_reproducible_and_normalized() {
        let a = direction_ensemble(1.0, 2, 9, 42).unwrap();
        let b = direction_ensemble(1.0, 2, 9, 42).unwrap();
        assert_eq!(a, b);
        for v in &a {
            assert!((v.norm_c() - 1.0).abs() < 1e-12);
        }
        assert!(a[2].has_jumps());
    }
}
