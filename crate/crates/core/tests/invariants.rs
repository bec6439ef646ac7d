use nalgebra::dvector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdde_core::analysis::{basin_probe, BasinConfig};
use sdde_core::lyapunov::{estimate_exponent, ExponentConfig, NormKind};
use sdde_core::presets;
use sdde_core::sdde::{integrate, omega_limit_sample, semiflow_map};
use sdde_core::{phase_distance, Phase, Segment, StepControl};

fn smooth_initial(a: f64, b: f64, k: f64) -> Segment {
    Segment::from_fn(1.0, 12, move |s| dvector![a + b * (k * s).sin()], move |s| dvector![b * k * (k * s).cos()]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle_holds(idx in 0usize..5, s in 0.0f64..2.5, t in 0.0f64..2.5, a in -0.8f64..0.8, b in -0.3f64..0.3, th in 0.0f64..1.0) {
        let model = presets::all_default().swap_remove(idx);
        let ctrl = StepControl::default();
        let pre = integrate(&model, &Phase::new(vec![th; model.driving().dim()]), &smooth_initial(a, b, 2.0), 2.0, &ctrl).unwrap();
        let (theta, x) = (pre.phase_at(2.0), pre.segment_at(2.0).unwrap());
        let traj = integrate(&model, &theta, &x, s + t, &ctrl).unwrap();
        let (ps, us) = (traj.phase_at(s), traj.segment_at(s).unwrap());
        let (pt, ut) = semiflow_map(&model, &ps, &us, t, &ctrl).unwrap();
        prop_assert!(phase_distance(&pt, &traj.phase_at(s + t)).unwrap() < 1e-12);
        prop_assert!(ut.sub(&traj.segment_at(s + t).unwrap()).unwrap().norm_c() < 1e-5);
    }

    #[test]
    fn m0_matches_exponential(a in 0.2f64..3.0, c in -2.0f64..2.0, t in 0.5f64..6.0) {
        let traj = integrate(&presets::m0(a), &Phase::zeros(1), &Segment::constant(1.0, dvector![c]), t, &StepControl::default()).unwrap();
        prop_assert!((traj.y(t).unwrap()[0] - c * (-a * t).exp()).abs() < 1e-7 * (1.0 + c.abs()));
    }

    #[test]
    fn derivative_audit_is_small(idx in 0usize..5, seed in any::<u64>()) {
        let model = presets::all_default().swap_remove(idx);
        let audit = model.derivative_audit(&mut ChaCha8Rng::seed_from_u64(seed), 8).unwrap();
        prop_assert!(audit.jacobian < 1e-5, "{audit:?}");
        prop_assert!(audit.delay < 1e-5, "{audit:?}");
    }

    #[test]
    fn realized_delay_stays_in_range(a in -3.0f64..3.0, t in 0.0f64..4.0) {
        let model = presets::m2(1.0, 0.25, 1.0);
        let traj = integrate(&model, &Phase::zeros(1), &Segment::constant(1.0, dvector![a]), 4.0, &StepControl::default()).unwrap();
        let tau = traj.realized_delay(t).unwrap();
        prop_assert!((0.0..=1.0).contains(&tau));
    }
}

#[test]
fn m0_exponent_is_minus_a() {
    for a in [0.5, 1.0, 2.0] {
        let model = presets::m0(a);
        let base = vec![(Phase::zeros(1), Segment::zeros(1.0, 1))];
        let cfg = ExponentConfig { horizon: 20.0, directions: 4, ..ExponentConfig::default() };
        let l = estimate_exponent(&model, &base, &cfg, NormKind::W, &StepControl::default()).unwrap().lambda;
        assert!((l + a).abs() < 1e-3, "a = {a}: {l}");
    }
}

fn observed_order(model: &sdde_core::SddeModel, steps: usize) -> f64 {
    let ctrl = StepControl::default();
    let th = Phase::zeros(model.driving().dim());
    let pre = integrate(model, &th, &Segment::constant(1.0, dvector![0.4]), 3.0, &ctrl).unwrap();
    let (th0, x0) = (pre.phase_at(3.0), pre.segment_at(3.0).unwrap());
    let at = |n: usize| integrate(model, &th0, &x0, 5.0, &StepControl::with_steps(n)).unwrap().y(5.0).unwrap();
    let (a, b, c) = (at(steps), at(2 * steps), at(4 * steps));
    ((&a - &b).norm() / (&b - &c).norm()).log2()
}

#[test]
fn self_convergence_order() {
    for model in [presets::m2(1.0, 0.25, 1.0), presets::m3(1.5), presets::m4()] {
        let p = 0.5 * (observed_order(&model, 16) + observed_order(&model, 32));
        assert!(p >= 3.0, "{}: observed order {p}", model.name());
    }
    let m1 = presets::m1(1.0 / std::f64::consts::E);
    let fine = |n| integrate(&m1, &Phase::zeros(1), &Segment::constant(1.0, dvector![1.0]), 20.0, &StepControl::with_steps(n)).unwrap().y(20.0).unwrap();
    assert!((fine(64) - fine(128)).norm() < 1e-6);
}

#[test]
fn horizon_stabilizes_on_m1() {
    let model = presets::m1(1.0 / std::f64::consts::E);
    let base = vec![(Phase::zeros(1), Segment::zeros(1.0, 1))];
    let est = |horizon| {
        let cfg = ExponentConfig { horizon, directions: 4, ..ExponentConfig::default() };
        estimate_exponent(&model, &base, &cfg, NormKind::C, &StepControl::default()).unwrap().lambda
    };
    let (a, b) = (est(100.0), est(200.0));
    assert!((a - b).abs() < 1e-2, "{a} vs {b}");
}

#[test]
fn m4_basins_are_open_and_disjoint() {
    let model = presets::m4();
    let ctrl = StepControl::default();
    let th = Phase::zeros(1);
    let plus = omega_limit_sample(&model, &th, &Segment::constant(1.0, dvector![0.5]), 30.0, 2.0, 1.0 / 16.0, &ctrl).unwrap();
    let minus = omega_limit_sample(&model, &th, &Segment::constant(1.0, dvector![-0.5]), 30.0, 2.0, 1.0 / 16.0, &ctrl).unwrap();
    let cfg = BasinConfig { horizon: 30.0, ..BasinConfig::default() };
    let centers = [0.3, 1.0, 1.7];
    let mut probes = Vec::new();
    for c in centers {
        for d in [-0.05, 0.0, 0.05] {
            probes.push((th.clone(), smooth_initial(c + d, 0.02, 3.0)));
            probes.push((th.clone(), smooth_initial(-(c + d), 0.02, 3.0)));
        }
    }
    let to_plus = basin_probe(&model, &plus, &probes, &cfg, &ctrl).unwrap();
    let to_minus = basin_probe(&model, &minus, &probes, &cfg, &ctrl).unwrap();
    for (k, (p, m)) in to_plus.iter().zip(&to_minus).enumerate() {
        let positive = k % 2 == 0;
        assert_eq!(p.attracted, positive, "probe {k}");
        assert_eq!(m.attracted, !positive, "probe {k}");
    }
}
