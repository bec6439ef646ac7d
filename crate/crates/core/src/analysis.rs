//! Sampling-based certificates built on the semiflow: exponential
//! stability, fiber cardinality, domains of attraction and almost
//! periodicity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driving::{phase_distance, Phase};
use crate::error::{Error, Result};
use crate::sdde::{integrate, DenseView, SddeModel, StepControl, Trajectory};
use crate::segment::{History, Segment};
use crate::variational::direction_ensemble;

/// Least-squares line `y = slope·x + intercept` with its `R²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    StableConsistent,
    UnstableConsistent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    /// Perturbation size; `None` means `1e-3 (1 + ‖x̄‖_W)` per base point.
    pub delta: Option<f64>,
    pub perturbations: usize,
    pub horizon: f64,
    /// Regression points on `[T/4, T]`.
    pub grid: usize,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            delta: None,
            perturbations: 4,
            horizon: 10.0,
            grid: 120,
            seed: 7,
        }
    }
}

/// Decay fit in one norm, worst case over all samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDecay {
    /// Minimum over samples of the fitted decay rate.
    pub beta_fit: f64,
    /// Maximum over samples of the fitted prefactor.
    pub k_fit: f64,
    /// Minimum over samples of `R²`.
    pub r2: f64,
    pub meets_target: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub lambda_hat: f64,
    pub beta_target: f64,
    pub delta_used: Vec<f64>,
    pub c_norm: NormDecay,
    pub w_norm: NormDecay,
    /// Perturbed runs truncated by the divergence guard (δ too large or
    /// unstable set).
    pub blowups: usize,
    pub samples: usize,
    pub verdict: Verdict,
}

impl StabilityCertificate {
    pub fn beta_fit(&self) -> f64 {
        self.c_norm.beta_fit
    }
    pub fn k1_fit(&self) -> f64 {
        self.c_norm.k_fit
    }
    pub fn k2_fit(&self) -> f64 {
        self.w_norm.k_fit
    }
}

/// `‖u(t) − ū(t)‖` in both norms, read without materializing segments.
fn diff_norms(a: &Trajectory, b: &Trajectory, t: f64) -> Result<(f64, f64)> {
    let r = a.model().max_delay();
    let diff = Segment::combine(1.0, &a.segment_at(t)?, -1.0, &b.segment_at(t)?)?;
    debug_assert!((diff.r() - r).abs() < 1e-12);
    Ok(diff.norms_with(crate::segment::N_NORM))
}

/// Perturbs every sampled point of `K` and fits the decay of the difference
/// in both norms.
pub fn stability_probe(
    model: &SddeModel,
    k_sample: &[(Phase, Segment)],
    lambda_hat: f64,
    cfg: &StabilityConfig,
    ctrl: &StepControl,
) -> Result<StabilityCertificate> {
    if k_sample.is_empty() || cfg.perturbations == 0 || cfg.grid < 2 {
        return Err(Error::InvalidParameter("stability probe needs samples, perturbations and a grid".into()));
    }
    if let Some(d) = cfg.delta {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("delta = {d} must be positive")));
        }
    }
    let r = model.max_delay();
    let dirs = direction_ensemble(r, model.dim(), cfg.perturbations, cfg.seed)?;
    let beta_target = if lambda_hat < 0.0 { -0.8 * lambda_hat } else { 0.0 };
    let times: Vec<f64> = (0..cfg.grid)
        .map(|k| cfg.horizon * (0.25 + 0.75 * k as f64 / (cfg.grid - 1) as f64))
        .collect();

    struct Sample {
        c: Option<LineFit>,
        w: Option<LineFit>,
        delta: f64,
        v_w: f64,
        blowup: bool,
    }
    let per_point = k_sample
        .par_iter()
        .map(|(theta, xbar)| {
            crate::sdde::check_initial(model, theta, xbar)?;
            let tol = crate::sdde::default_c0_tol(xbar);
            let compat = crate::sdde::check_compatibility(model, theta, xbar, tol)?;
            if !compat.compatible {
                return Err(Error::NotCompatible { residual: compat.residual, tol });
            }
            let delta = cfg.delta.unwrap_or(1e-3 * (1.0 + xbar.norm_w()));
            let reference = integrate(model, theta, xbar, cfg.horizon, ctrl)?;
            if let Some((t, norm)) = reference.blowup() {
                return Err(Error::BlowUp { t, norm });
            }
            dirs.par_iter()
                .map(|v| {
                    let x = Segment::combine(1.0, xbar, delta, v)?;
                    let pert = integrate(model, theta, &x, cfg.horizon, ctrl)?;
                    if pert.is_truncated() {
                        return Ok(Sample { c: None, w: None, delta, v_w: v.norm_w(), blowup: true });
                    }
                    let mut lc = Vec::with_capacity(times.len());
                    let mut lw = Vec::with_capacity(times.len());
                    let mut ts = Vec::with_capacity(times.len());
                    for &t in &times {
                        let (c, w) = diff_norms(&pert, &reference, t)?;
                        if c > 0.0 && w > 0.0 {
                            ts.push(t);
                            lc.push(c.ln());
                            lw.push(w.ln());
                        }
                    }
                    Ok(Sample {
                        c: fit_line(&ts, &lc),
                        w: fit_line(&ts, &lw),
                        delta,
                        v_w: v.norm_w(),
                        blowup: false,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let samples: Vec<&Sample> = per_point.iter().flatten().collect();
    let blowups = samples.iter().filter(|s| s.blowup).count();
    let fold = |pick: &dyn Fn(&Sample) -> Option<LineFit>, scale: &dyn Fn(&Sample) -> f64| {
        let mut out = NormDecay {
            beta_fit: f64::INFINITY,
            k_fit: 0.0,
            r2: 1.0,
            meets_target: false,
        };
        let mut any = false;
        for s in samples.iter().filter(|s| !s.blowup) {
            match pick(s) {
                Some(fit) => {
                    any = true;
                    out.beta_fit = out.beta_fit.min(-fit.slope);
                    out.k_fit = out.k_fit.max(fit.intercept.exp() / scale(s));
                    out.r2 = out.r2.min(fit.r2);
                }
                None => out.r2 = 0.0,
            }
        }
        if !any {
            out.beta_fit = f64::NAN;
            out.r2 = 0.0;
        }
        out.meets_target = out.beta_fit >= beta_target && out.beta_fit > 0.0;
        out
    };
    let c_norm = fold(&|s| s.c, &|s| s.delta);
    let w_norm = fold(&|s| s.w, &|s| s.delta * s.v_w);
    let verdict = if lambda_hat < 0.0
        && blowups == 0
        && c_norm.beta_fit > 0.0
        && w_norm.beta_fit > 0.0
        && c_norm.r2 >= 0.98
        && w_norm.r2 >= 0.98
    {
        Verdict::StableConsistent
    } else if lambda_hat > 0.0 && (blowups > 0 || c_norm.beta_fit < 0.0) && !(c_norm.beta_fit > 0.0) {
        Verdict::UnstableConsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityCertificate {
        lambda_hat,
        beta_target,
        delta_used: per_point.iter().filter_map(|p| p.first().map(|s| s.delta)).collect(),
        c_norm,
        w_norm,
        blowups,
        samples: samples.len(),
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// Number of segment clusters in the fiber over the probe phase.
    pub k: usize,
    pub cluster_sizes: Vec<usize>,
    /// Largest `‖·‖_C` distance within each cluster.
    pub diameters: Vec<f64>,
    /// Smallest `‖·‖_C` distance between different clusters.
    pub separation: f64,
    pub return_tol: f64,
    pub cluster_tol: f64,
    pub samples_used: usize,
    /// Heuristic: one minimal set per cluster.
    pub minimal_sets_estimate: usize,
    /// Every diameter below `cluster_tol / 2`.
    pub well_separated: bool,
}

/// Clusters the sampled segments whose phase is within `return_tol` of
/// `theta_probe` by single linkage at `cluster_tol` in `‖·‖_C`.
pub fn cover_detect(
    theta_probe: &Phase,
    orbit_samples: &[(Phase, Segment)],
    return_tol: f64,
    cluster_tol: f64,
) -> Result<CoverReport> {
    let mut near = Vec::new();
    for (th, seg) in orbit_samples {
        if phase_distance(th, theta_probe)? <= return_tol {
            near.push(seg);
        }
    }
    if near.is_empty() {
        return Err(Error::NoSamples(return_tol));
    }
    let m = near.len();
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = near[i].sub(near[j])?.norm_c();
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..m {
        for j in i + 1..m {
            if dist[i * m + j] <= cluster_tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..m).map(|i| find(&mut parent, i)).collect();
    let mut labels: Vec<usize> = roots.clone();
    labels.sort_unstable();
    labels.dedup();
    let mut sizes = vec![0; labels.len()];
    let mut diameters = vec![0.0f64; labels.len()];
    let mut separation = f64::INFINITY;
    let idx = |root: usize| labels.binary_search(&root).expect("root is a label");
    for i in 0..m {
        sizes[idx(roots[i])] += 1;
        for j in i + 1..m {
            if roots[i] == roots[j] {
                let c = idx(roots[i]);
                diameters[c] = diameters[c].max(dist[i * m + j]);
            } else {
                separation = separation.min(dist[i * m + j]);
            }
        }
    }
    let k = labels.len();
    Ok(CoverReport {
        k,
        cluster_sizes: sizes,
        well_separated: diameters.iter().all(|d| *d < cluster_tol / 2.0),
        diameters,
        separation,
        return_tol,
        cluster_tol,
        samples_used: m,
        minimal_sets_estimate: k,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinConfig {
    pub horizon: f64,
    /// Spacing of the comparison times.
    pub stride: f64,
    pub eps_match: f64,
    /// Largest phase distance at which a reference sample is a candidate;
    /// `None` means half a stride of the fastest frequency.
    pub phase_tol: Option<f64>,
}

impl Default for BasinConfig {
    fn default() -> Self {
        Self {
            horizon: 20.0,
            stride: 1.0 / 16.0,
            eps_match: 1e-3,
            phase_tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinOutcome {
    pub attracted: bool,
    /// First comparison time after which the distance stays below `eps_match`.
    pub t_entry: Option<f64>,
    pub final_distance: f64,
    /// Fitted exponential rate of the distance to the reference set.
    pub rate: Option<f64>,
    pub blowup: bool,
}

/// Tests each probe for convergence, in `‖·‖_W`, to the sampled set `M`.
pub fn basin_probe(
    model: &SddeModel,
    m_sample: &[(Phase, Segment)],
    probes: &[(Phase, Segment)],
    cfg: &BasinConfig,
    ctrl: &StepControl,
) -> Result<Vec<BasinOutcome>> {
    if m_sample.is_empty() {
        return Err(Error::InvalidParameter("empty reference sample".into()));
    }
    if !(cfg.stride > 0.0 && cfg.horizon > 0.0 && cfg.eps_match > 0.0) {
        return Err(Error::InvalidParameter("basin probe needs positive horizon, stride and eps_match".into()));
    }
    let fmax = model.driving().freq().iter().fold(0.0f64, |a, f| a.max(f.abs()));
    let phase_tol = cfg.phase_tol.unwrap_or(0.5 * cfg.stride * fmax + 1e-12);
    let count = (cfg.horizon / cfg.stride + 1e-9).floor() as usize;
    probes
        .par_iter()
        .map(|(theta, x)| {
            let traj = integrate(model, theta, x, cfg.horizon, ctrl)?;
            if traj.is_truncated() {
                return Ok(BasinOutcome {
                    attracted: false,
                    t_entry: None,
                    final_distance: f64::INFINITY,
                    rate: None,
                    blowup: true,
                });
            }
            let mut ts = Vec::with_capacity(count + 1);
            let mut ds = Vec::with_capacity(count + 1);
            for k in 0..=count {
                let t = k as f64 * cfg.stride;
                let ph = traj.phase_at(t);
                let u = traj.segment_at(t)?;
                let mut best = f64::INFINITY;
                for (mth, mseg) in m_sample {
                    if phase_distance(mth, &ph)? <= phase_tol {
                        best = best.min(u.sub(mseg)?.norm_w());
                    }
                }
                ts.push(t);
                ds.push(best);
            }
            let last_quarter = ts.iter().position(|&t| t >= 0.75 * cfg.horizon).unwrap_or(ts.len() - 1);
            let attracted = ds[last_quarter..].iter().all(|&d| d < cfg.eps_match);
            let t_entry = attracted
                .then(|| {
                    let mut k = ds.len();
                    while k > 0 && ds[k - 1] < cfg.eps_match {
                        k -= 1;
                    }
                    ts[k]
                });
            let (lt, ld): (Vec<f64>, Vec<f64>) = ts
                .iter()
                .zip(&ds)
                .filter(|(_, d)| **d > 1e-300 && d.is_finite())
                .map(|(t, d)| (*t, d.ln()))
                .unzip();
            Ok(BasinOutcome {
                attracted,
                t_entry,
                final_distance: *ds.last().expect("at least one comparison"),
                rate: fit_line(&lt, &ld).map(|f| -f.slope),
                blowup: false,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriod {
    pub delta_ap: f64,
    pub t_ap: f64,
    pub phase_distance: f64,
    /// `sup_t |y(t + T_ap) − y(t)|` over the sample window.
    pub sup_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriodicityReport {
    pub t_start: f64,
    pub entries: Vec<AlmostPeriod>,
    /// Differences non-increasing as `δ_ap` decreases.
    pub monotone: bool,
}

/// For each `δ_ap` picks the first near-return time of the driving phase
/// and measures how far the solution is from repeating itself.
pub fn almost_periodicity_diagnostic(traj: &Trajectory, t_start: f64, deltas: &[f64]) -> Result<AlmostPeriodicityReport> {
    if traj.is_truncated() {
        return Err(Error::Unbounded(traj.blowup().map_or(f64::INFINITY, |b| b.1)));
    }
    let driving = traj.model().driving();
    let fmax = driving.freq().iter().fold(0.0f64, |a, f| a.max(f.abs()));
    if fmax == 0.0 {
        return Err(Error::InvalidParameter("constant driving has no near-returns".into()));
    }
    let origin = Phase::zeros(driving.dim());
    let end = traj.end_time();
    let min_window = traj.model().max_delay();
    let available = end - t_start - min_window;
    let dt = 1e-3 / fmax;
    let dist = |t: f64| phase_distance(&origin, &driving.advance(&origin, t)).expect("same dimension");
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[b].total_cmp(&deltas[a]));
    let mut entries = Vec::with_capacity(deltas.len());
    for &i in &order {
        let delta = deltas[i];
        let mut t = 0.5 / fmax;
        while t <= available && dist(t) >= delta {
            t += dt;
        }
        if t > available {
            return Err(Error::InsufficientSample(format!(
                "no near-return within δ_ap = {delta} before t = {available:.3}"
            )));
        }
        while t + dt <= available && dist(t + dt) < dist(t) {
            t += dt;
        }
        let step = 0.5 * traj.model().max_delay() / 64.0;
        let n = ((end - t - t_start) / step).floor() as usize;
        let mut sup = 0.0f64;
        for k in 0..=n {
            let s = t_start + k as f64 * step;
            sup = sup.max((traj.y(s + t)? - traj.y(s)?).norm());
        }
        entries.push(AlmostPeriod {
            delta_ap: delta,
            t_ap: t,
            phase_distance: dist(t),
            sup_difference: sup,
        });
    }
    let monotone = entries.windows(2).all(|p| p[1].sup_difference <= p[0].sup_difference);
    Ok(AlmostPeriodicityReport {
        t_start,
        entries,
        monotone,
    })
}

/// Measured constants of the smallness lemmas for one perturbation size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessRow {
    pub delta: f64,
    /// `sup_t |ȳ(t−τ(u)) − ȳ(t−τ(ū)) + ȳ'(t−τ(ū)) D₂τ(ū)(u−ū)| / ‖u−ū‖_C`.
    pub eps_delay_linearization: f64,
    /// `sup_{t ≤ r} |ỹ(t−τ(u)) − ỹ(t−τ(ū))| / ‖u−ū‖_C`, bounded by 2.
    pub ratio_early: f64,
    /// The same ratio for `t ≥ r`.
    pub eps_late: f64,
}

/// Sweeps `x = x̄ + δ v` and measures the smallness ratios on `[0, T]`.
pub fn smallness_check(
    model: &SddeModel,
    theta: &Phase,
    xbar: &Segment,
    v: &Segment,
    deltas: &[f64],
    horizon: f64,
    ctrl: &StepControl,
) -> Result<Vec<SmallnessRow>> {
    let r = model.max_delay();
    let reference = integrate(model, theta, xbar, horizon, ctrl)?;
    let step = ctrl.step(r);
    let count = (horizon / step).floor() as usize;
    deltas
        .par_iter()
        .map(|&delta| {
            let pert = integrate(model, theta, &Segment::combine(1.0, xbar, delta, v)?, horizon, ctrl)?;
            if let Some((t, norm)) = pert.blowup() {
                return Err(Error::BlowUp { t, norm });
            }
            let mut row = SmallnessRow {
                delta,
                eps_delay_linearization: 0.0,
                ratio_early: 0.0,
                eps_late: 0.0,
            };
            for k in 1..=count {
                let t = k as f64 * step;
                let th = reference.phase_at(t);
                let (u, ub): (DenseView, DenseView) = (pert.view_at(t), reference.view_at(t));
                let diff_c = pert.segment_at(t)?.sub(&reference.segment_at(t)?)?.norm_c();
                if diff_c == 0.0 {
                    continue;
                }
                let (tau_u, tau_b) = (model.tau(&th, &u)?, model.tau(&th, &ub)?);
                let ell = model.d2tau(&th, &ub)?;
                let diff_seg = pert.segment_at(t)?.sub(&reference.segment_at(t)?)?;
                let lin = ub.value(-tau_u) - ub.value(-tau_b) + ub.deriv(-tau_b) * ell.apply(&diff_seg);
                row.eps_delay_linearization = row.eps_delay_linearization.max(lin.norm() / diff_c);
                let tilde = |s: f64| u.value(s) - ub.value(s);
                let ratio = (tilde(-tau_u) - tilde(-tau_b)).norm() / diff_c;
                if t <= r {
                    row.ratio_early = row.ratio_early.max(ratio);
                } else {
                    row.eps_late = row.eps_late.max(ratio);
                }
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::sdde::omega_limit_sample;
    use nalgebra::dvector;

    fn ctrl() -> StepControl {
        StepControl::default()
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0];
        let f = fit_line(&x, &[1.0, -1.0, -3.0]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15 && (f.r2 - 1.0).abs() < 1e-15);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn m0_decay_rate_is_one() {
        let m0 = presets::m0(1.0);
        let base = vec![(Phase::zeros(1), Segment::zeros(1.0, 1))];
        let cfg = StabilityConfig {
            delta: Some(1e-3),
            perturbations: 3,
            ..StabilityConfig::default()
        };
        let cert = stability_probe(&m0, &base, -1.0, &cfg, &ctrl()).unwrap();
        assert!((cert.c_norm.beta_fit - 1.0).abs() < 0.02, "{cert:?}");
        assert!((cert.w_norm.beta_fit - 1.0).abs() < 0.02, "{cert:?}");
        assert_eq!(cert.verdict, Verdict::StableConsistent);
    }

    #[test]
    fn cover_of_zero_solution() {
        let m0 = presets::m0(1.0);
        let mut samples = Vec::new();
        for c in [-1.0, 0.5, 2.0] {
            samples.extend(omega_limit_sample(&m0, &Phase::zeros(1), &Segment::constant(1.0, dvector![c]), 25.0, 1.0, 0.25, &ctrl()).unwrap());
        }
        let rep = cover_detect(&Phase::zeros(1), &samples, 1e-9, 1e-3).unwrap();
        assert_eq!(rep.k, 1);
        assert!(rep.diameters[0] < 1e-6);
        assert!(matches!(cover_detect(&Phase::new(vec![0.1]), &samples, 1e-9, 1e-3), Err(Error::NoSamples(_))));
    }

    #[test]
    fn basin_of_zero_for_m0() {
        let m0 = presets::m0(1.0);
        let m_sample = omega_limit_sample(&m0, &Phase::zeros(1), &Segment::zeros(1.0, 1), 0.0, 1.0, 1.0 / 16.0, &ctrl()).unwrap();
        let probes = vec![m_sample[3].clone(), (Phase::zeros(1), Segment::constant(1.0, dvector![10.0]))];
        let cfg = BasinConfig {
            horizon: 30.0,
            ..BasinConfig::default()
        };
        let out = basin_probe(&m0, &m_sample, &probes, &cfg, &ctrl()).unwrap();
        assert!(out[0].attracted);
        assert_eq!(out[0].t_entry, Some(0.0));
        assert!(out[1].attracted);
        assert!((out[1].rate.unwrap() - 1.0).abs() < 0.05, "{:?}", out[1]);
    }

    #[test]
    fn zero_solution_is_trivially_almost_periodic() {
        let m3 = presets::m0(1.0);
        let traj = integrate(&m3, &Phase::zeros(1), &Segment::zeros(1.0, 1), 6.0, &ctrl()).unwrap();
        let rep = almost_periodicity_diagnostic(&traj, 1.0, &[0.05]).unwrap();
        assert_eq!(rep.entries[0].sup_difference, 0.0);
        assert!((rep.entries[0].t_ap - 1.0).abs() < 2e-3);
    }

    #[test]
    fn insufficient_sample() {
        let m0 = presets::m0(1.0);
        let traj = integrate(&m0, &Phase::zeros(1), &Segment::zeros(1.0, 1), 1.5, &ctrl()).unwrap();
        assert!(matches!(almost_periodicity_diagnostic(&traj, 0.5, &[0.01]), Err(Error::InsufficientSample(_))));
    }
}
