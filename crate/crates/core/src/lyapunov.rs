//! Upper Lyapunov exponents of the linearized semiflow by renormalized
//! window integration, in the sup norm and in the Lipschitz norm.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driving::Phase;
use crate::error::{Error, Result};
use crate::sdde::{integrate, SddeModel, StepControl};
use crate::segment::{Segment, N_NORM};
use crate::variational::{direction_ensemble, Linearization};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    C,
    W,
}

impl NormKind {
    fn of(self, (c, w): (f64, f64)) -> f64 {
        match self {
            NormKind::C => c,
            NormKind::W => w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub horizon: f64,
    /// Renormalization window; `None` means `r`.
    pub window: Option<f64>,
    pub directions: usize,
    pub seed: u64,
    /// `μ = λ̂ + margin` in the growth-bound check.
    pub bound_margin: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            window: None,
            directions: 32,
            seed: 1,
            bound_margin: 0.05,
        }
    }
}

/// Identifies what an estimate was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub seed: u64,
    pub base_digest: String,
    pub horizon: f64,
    pub window: f64,
    pub directions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub mu: f64,
    /// `max ‖w(t)‖/‖v‖ · e^{−μt}` over the first half of the horizon.
    pub k_mu: f64,
    pub samples: usize,
    /// Second-half samples exceeding `k_μ e^{μt}`.
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub norm: NormKind,
    /// Max over points and directions of the tail rate.
    pub lambda: f64,
    /// Max over points and directions of the full-horizon rate.
    pub lambda_full: f64,
    /// Per base point: max over directions of the tail rate.
    pub point_lambda: Vec<f64>,
    /// As `point_lambda`, from the series started at `Π(Δ, ·)`.
    pub point_lambda_shifted: Vec<f64>,
    pub base_points: usize,
    pub ensemble_size: usize,
    pub horizon: f64,
    pub window: f64,
    pub tail_windows: usize,
    pub c0_hat: f64,
    pub cr_hat: f64,
    pub bound: BoundCheck,
    pub provenance: Provenance,
    /// `log_growth[p][d][k]`: log of the norm ratio over window `k`.
    #[serde(skip)]
    pub log_growth: Vec<Vec<Vec<f64>>>,
}

impl ExponentReport {
    /// CSV `point_id,dir_id,window_idx,log_growth`.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("point_id,dir_id,window_idx,log_growth\n");
        for (p, dirs) in self.log_growth.iter().enumerate() {
            for (d, series) in dirs.iter().enumerate() {
                for (k, g) in series.iter().enumerate() {
                    writeln!(out, "{p},{d},{k},{g}").unwrap();
                }
            }
        }
        out
    }
}

fn tail_rate(series: &[f64], window: f64) -> f64 {
    let m = series.len().div_ceil(2);
    series[series.len() - m..].iter().sum::<f64>() / (m as f64 * window)
}

/// FNV-1a over the bit patterns of the base points.
fn digest(points: &[(Phase, Segment)]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |x: f64| {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for (th, seg) in points {
        th.coords().iter().for_each(|&c| eat(c));
        seg.mesh().iter().for_each(|&c| eat(c));
        for k in 0..seg.mesh().len() {
            seg.node_value(k).iter().for_each(|&c| eat(c));
        }
    }
    format!("{h:016x}")
}

struct DirRun {
    series: Vec<f64>,
    /// `‖w(r)‖_W / ‖v‖_C` when the window equals `r`.
    cr: f64,
}

/// Estimates `λ_K` over the base-point sample in the chosen norm.
pub fn estimate_exponent(
    model: &SddeModel,
    base_points: &[(Phase, Segment)],
    cfg: &ExponentConfig,
    norm: NormKind,
    ctrl: &StepControl,
) -> Result<ExponentReport> {
    let r = model.max_delay();
    let window = cfg.window.unwrap_or(r);
    if base_points.is_empty() || cfg.directions == 0 {
        return Err(Error::InvalidParameter("need at least one base point and one direction".into()));
    }
    if window < r * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!("window {window} shorter than r = {r}")));
    }
    let n_windows = (cfg.horizon / window).round() as usize;
    if n_windows < 2 || (n_windows as f64 * window - cfg.horizon).abs() > 1e-9 * cfg.horizon {
        return Err(Error::InvalidParameter(format!(
            "horizon {} must be a multiple (≥ 2) of the window {window}",
            cfg.horizon
        )));
    }
    let directions = direction_ensemble(r, model.dim(), cfg.directions, cfg.seed)?;
    let runs = base_points
        .par_iter()
        .map(|(theta, xbar)| {
            let reference = integrate(model, theta, xbar, cfg.horizon, ctrl)?;
            let lin = Linearization::new(&reference, ctrl)?;
            let c0 = lin.c0_hat(0.0, cfg.horizon);
            let dirs = directions
                .par_iter()
                .map(|v| {
                    let mut series = Vec::with_capacity(n_windows);
                    let mut cur = v.clone();
                    let mut cur_norm = norm.of(v.norms_with(N_NORM));
                    let mut cr = f64::NAN;
                    for k in 0..n_windows {
                        let sol = lin.propagate(k as f64 * window, &cur, window)?;
                        let w = sol.segment_at(window)?;
                        let norms = w.norms_with(N_NORM);
                        if k == 0 && (window - r).abs() <= 1e-12 * r {
                            cr = norms.1 / v.norm_c();
                        }
                        let wn = norm.of(norms);
                        if !(wn > 0.0 && wn.is_finite()) {
                            return Err(Error::Unbounded(wn));
                        }
                        series.push((wn / cur_norm).ln());
                        cur = w.scale(1.0 / wn);
                        cur_norm = 1.0;
                    }
                    Ok(DirRun { series, cr })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((c0, dirs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lambda = f64::NEG_INFINITY;
    let mut lambda_full = f64::NEG_INFINITY;
    let mut point_lambda = Vec::new();
    let mut point_lambda_shifted = Vec::new();
    let mut c0_hat = 0.0f64;
    let mut cr_hat = 0.0f64;
    let mut log_growth = Vec::new();
    for (c0, dirs) in &runs {
        c0_hat = c0_hat.max(*c0);
        let mut pl = f64::NEG_INFINITY;
        let mut pls = f64::NEG_INFINITY;
        for d in dirs {
            let tail = tail_rate(&d.series, window);
            pl = pl.max(tail);
            pls = pls.max(tail_rate(&d.series[1..], window));
            lambda_full = lambda_full.max(d.series.iter().sum::<f64>() / cfg.horizon);
            if d.cr.is_finite() {
                cr_hat = cr_hat.max(d.cr);
            }
        }
        lambda = lambda.max(pl);
        point_lambda.push(pl);
        point_lambda_shifted.push(pls);
        log_growth.push(dirs.iter().map(|d| d.series.clone()).collect::<Vec<_>>());
    }

    let mu = lambda + cfg.bound_margin;
    let half = n_windows / 2;
    let mut k_mu = 0.0f64;
    let mut samples = 0;
    let mut excess = Vec::new();
    for series in log_growth.iter().flatten() {
        let mut acc = 0.0;
        for (k, g) in series.iter().enumerate() {
            acc += g;
            let e = acc - mu * (k + 1) as f64 * window;
            samples += 1;
            if k < half {
                k_mu = k_mu.max(e.exp());
            } else {
                excess.push(e);
            }
        }
    }
    let k_mu = k_mu.max(1.0);
    let violations = excess.iter().filter(|&&e| e > k_mu.ln() + 1e-12).count();

    Ok(ExponentReport {
        norm,
        lambda,
        lambda_full,
        point_lambda,
        point_lambda_shifted,
        base_points: base_points.len(),
        ensemble_size: cfg.directions,
        horizon: cfg.horizon,
        window,
        tail_windows: n_windows.div_ceil(2),
        c0_hat,
        cr_hat,
        bound: BoundCheck {
            mu,
            k_mu,
            samples,
            violations,
        },
        provenance: Provenance {
            model: model.name().to_string(),
            seed: cfg.seed,
            base_digest: digest(base_points),
            horizon: cfg.horizon,
            window,
            directions: cfg.directions,
        },
        log_growth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityCheck {
    pub passed: bool,
    pub difference: f64,
    pub tol: f64,
    /// `λ̂_{W,p} ≤ λ̂_{C,p} + tol` for every base point.
    pub w_below_c: bool,
    /// `λ̂_{C,p} ≤ λ̂_{W,p}(Π(Δ,·)) + tol` for every base point.
    pub c_below_shifted_w: bool,
}

/// `|λ̂_C − λ̂_W| ≤ tol` together with the per-point one-sided inequalities.
pub fn exponent_norm_equality_check(report_c: &ExponentReport, report_w: &ExponentReport, tol: f64) -> Result<EqualityCheck> {
    if report_c.provenance != report_w.provenance {
        return Err(Error::Provenance(format!(
            "{:?} vs {:?}",
            report_c.provenance, report_w.provenance
        )));
    }
    if report_c.norm != NormKind::C || report_w.norm != NormKind::W {
        return Err(Error::Provenance("expected one C-norm and one W-norm report".into()));
    }
    let difference = (report_c.lambda - report_w.lambda).abs();
    let w_below_c = report_w
        .point_lambda
        .iter()
        .zip(&report_c.point_lambda)
        .all(|(w, c)| *w <= c + tol);
    let c_below_shifted_w = report_c
        .point_lambda
        .iter()
        .zip(&report_w.point_lambda_shifted)
        .all(|(c, ws)| *c <= ws + tol);
    Ok(EqualityCheck {
        passed: difference <= tol && w_below_c && c_below_shifted_w,
        difference,
        tol,
        w_below_c,
        c_below_shifted_w,
    })
}

/// Rightmost root of `s + a + b e^{−sτ} = 0`.
pub fn characteristic_root_oracle(a: f64, b: f64, tau: f64) -> Result<Complex64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be positive")));
    }
    let g = |s: Complex64| s + a + b * (-s * tau).exp();
    let dg = |s: Complex64| 1.0 - b * tau * (-s * tau).exp();
    let d2g = |s: Complex64| b * tau * tau * (-s * tau).exp();
    let newton = |mut s: Complex64, f: &dyn Fn(Complex64) -> Complex64, df: &dyn Fn(Complex64) -> Complex64| {
        for _ in 0..200 {
            let d = df(s);
            if d.norm() == 0.0 {
                return None;
            }
            let step = f(s) / d;
            s -= step;
            if !s.is_finite() || s.re > 1e3 / tau || s.re < -1e3 / tau {
                return None;
            }
            if step.norm() <= 1e-15 * (1.0 + s.norm()) {
                break;
            }
        }
        Some(s)
    };
    let mut roots: Vec<Complex64> = Vec::new();
    for i in 0..=15 {
        for j in 0..=40 {
            let seed = Complex64::new(-10.0 / tau + 15.0 / tau * i as f64 / 15.0, 20.0 * std::f64::consts::PI / tau * j as f64 / 40.0);
            let Some(mut s) = newton(seed, &g, &dg) else { continue };
            // a double root slows Newton on g; locate it as a zero of g'
            if dg(s).norm() < 1e-4 {
                if let Some(c) = newton(s, &dg, &d2g) {
                    if g(c).norm() <= g(s).norm().max(1e-12) {
                        s = c;
                    }
                }
            }
            if g(s).norm() > 1e-9 * (1.0 + s.norm()) {
                continue;
            }
            if !roots.iter().any(|q| (q - s).norm() < 1e-7 * (1.0 + s.norm())) {
                roots.push(s);
            }
        }
    }
    roots
        .into_iter()
        .max_by(|p, q| p.re.total_cmp(&q.re).then(q.im.abs().total_cmp(&p.im.abs())))
        .map(|s| Complex64::new(s.re, s.im.abs()))
        .ok_or(Error::RootNotFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use nalgebra::dvector;
    use std::f64::consts::{E, FRAC_PI_2};

    #[test]
    fn oracle_examples() {
        assert!((characteristic_root_oracle(1.0, 0.0, 0.7).unwrap() - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let s = characteristic_root_oracle(0.0, 1.0 / E, 1.0).unwrap();
        assert!((s - Complex64::new(-1.0, 0.0)).norm() < 1e-8, "{s}");
        let s = characteristic_root_oracle(0.0, FRAC_PI_2, 1.0).unwrap();
        assert!(s.re.abs() < 1e-8 && (s.im - FRAC_PI_2).abs() < 1e-8, "{s}");
        assert!(characteristic_root_oracle(0.0, 2.0, 1.0).unwrap().re > 0.0);
        assert!(characteristic_root_oracle(1.0, 1.0, 0.0).is_err());
    }

    fn zero_base(model: &SddeModel, count: usize) -> Vec<(Phase, Segment)> {
        (0..count)
            .map(|k| (Phase::new(vec![k as f64 / count as f64; model.driving().dim()]), Segment::zeros(model.max_delay(), model.dim())))
            .collect()
    }

    fn cfg(horizon: f64, directions: usize) -> ExponentConfig {
        ExponentConfig {
            horizon,
            directions,
            ..ExponentConfig::default()
        }
    }

    #[test]
    fn m0_exponent_is_minus_a() {
        let m0 = presets::m0(1.0);
        let base = zero_base(&m0, 2);
        let c = estimate_exponent(&m0, &base, &cfg(20.0, 6), NormKind::C, &StepControl::default()).unwrap();
        let w = estimate_exponent(&m0, &base, &cfg(20.0, 6), NormKind::W, &StepControl::default()).unwrap();
        assert!((c.lambda + 1.0).abs() < 5e-3, "{}", c.lambda);
        assert!((w.lambda + 1.0).abs() < 5e-3, "{}", w.lambda);
        assert!(exponent_norm_equality_check(&c, &w, 1e-2).unwrap().passed);
        assert_eq!(c.bound.violations, 0);
    }

    #[test]
    fn renormalization_invariance() {
        let m1 = presets::m1(0.5);
        let th = Phase::zeros(1);
        let reference = integrate(&m1, &th, &Segment::zeros(1.0, 1), 10.0, &StepControl::default()).unwrap();
        let lin = Linearization::new(&reference, &StepControl::default()).unwrap();
        let v = Segment::from_fn(1.0, 8, |s| dvector![1.0 + s], |_| dvector![1.0]).unwrap();
        let rate = |v: &Segment| {
            let mut cur = v.clone();
            let mut n = cur.norm_c();
            let mut acc = 0.0;
            for k in 0..10 {
                let w = lin.propagate(k as f64, &cur, 1.0).unwrap().segment_at(1.0).unwrap();
                let wn = w.norm_c();
                acc += (wn / n).ln();
                cur = w.scale(1.0 / wn);
                n = 1.0;
            }
            acc / 10.0
        };
        assert!((rate(&v) - rate(&v.scale(1000.0))).abs() < 1e-12);
    }

    #[test]
    fn provenance_mismatch() {
        let m0 = presets::m0(1.0);
        let base = zero_base(&m0, 1);
        let c = estimate_exponent(&m0, &base, &cfg(4.0, 3), NormKind::C, &StepControl::default()).unwrap();
        let mut other = cfg(4.0, 3);
        other.seed = 99;
        let w = estimate_exponent(&m0, &base, &other, NormKind::W, &StepControl::default()).unwrap();
        assert!(matches!(exponent_norm_equality_check(&c, &w, 1e-2), Err(Error::Provenance(_))));
    }

    #[test]
    fn rejects_bad_windows() {
        let m0 = presets::m0(1.0);
        let base = zero_base(&m0, 1);
        let mut c = cfg(4.5, 2);
        assert!(estimate_exponent(&m0, &base, &c, NormKind::C, &StepControl::default()).is_err());
        c.horizon = 4.0;
        c.window = Some(0.5);
        assert!(estimate_exponent(&m0, &base, &c, NormKind::C, &StepControl::default()).is_err());
    }
}
