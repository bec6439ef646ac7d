//! Linear flows on the d-torus, used as the compact base (driving) flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A linear flow `θ ↦ θ + t·ν (mod 1)` on the d-torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusFlow {
    freq: Vec<f64>,
    /// Declared by the model author; never verified numerically.
    #[serde(default)]
    minimal: bool,
}

impl TorusFlow {
    pub fn new(freq: Vec<f64>, minimal: bool) -> Result<Self> {
        if freq.is_empty() {
            return Err(Error::InvalidParameter(
                "torus flow needs at least one frequency".into(),
            ));
        }
        if let Some(bad) = freq.iter().find(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "frequency {bad} is not finite"
            )));
        }
        Ok(Self { freq, minimal })
    }

    /// Periodic one-frequency flow.
    pub fn periodic(freq: f64) -> Self {
        Self::new(vec![freq], true).expect("finite frequency")
    }

    pub fn dim(&self) -> usize {
        self.freq.len()
    }

    pub fn freq(&self) -> &[f64] {
        &self.freq
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal
    }

    /// `σ_t(θ)`; `t` may be negative.
    pub fn advance(&self, theta: &Phase, t: f64) -> Phase {
        debug_assert_eq!(theta.dim(), self.dim());
        let coords = theta
            .theta
            .iter()
            .zip(&self.freq)
            .map(|(c, f)| wrap_unit(c + t * f))
            .collect();
        Phase { theta: coords }
    }
}

/// A point of the torus, coordinates reduced to `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Phase {
    theta: Vec<f64>,
}

impl Phase {
    pub fn new(coords: Vec<f64>) -> Self {
        Self {
            theta: coords.into_iter().map(wrap_unit).collect(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            theta: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.theta
    }

    /// Coordinates as angles `2πθ_i`, the form seen by model expressions.
    pub fn angles(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|c| std::f64::consts::TAU * c)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for Phase {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("phase must be finite".into()));
        }
        Ok(Phase::new(v))
    }
}

impl From<Phase> for Vec<f64> {
    fn from(p: Phase) -> Self {
        p.theta
    }
}

/// Circular max-metric on the torus.
pub fn phase_distance(a: &Phase, b: &Phase) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.theta
        .iter()
        .zip(&b.theta)
        .map(|(x, y)| {
            let d = (x - y).abs().rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max))
}

fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn advance_identity() {
        let flow = TorusFlow::periodic(1.0);
        let th = Phase::new(vec![0.25]);
        assert_eq!(flow.advance(&th, 0.0), th);
    }

    #[test]
    fn advance_one_period_of_first_coordinate() {
        let flow = TorusFlow::new(vec![1.0, 0.6180339887], true).unwrap();
        let th = flow.advance(&Phase::zeros(2), 1.0);
        assert!(th.coords()[0].abs() < 1e-15);
        assert!((th.coords()[1] - 0.6180339887).abs() < 1e-15);
    }

    #[test]
    fn advance_wraps() {
        let flow = TorusFlow::periodic(1.0);
        let th = flow.advance(&Phase::new(vec![0.9]), 0.2);
        assert!((th.coords()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn distances() {
        let d = |a: Vec<f64>, b: Vec<f64>| phase_distance(&Phase::new(a), &Phase::new(b)).unwrap();
        assert_eq!(d(vec![0.1], vec![0.1]), 0.0);
        assert!((d(vec![0.95], vec![0.05]) - 0.1).abs() < 1e-12);
        assert!((d(vec![0.0, 0.5], vec![0.5, 0.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn distance_dimension_mismatch() {
        let err = phase_distance(&Phase::zeros(1), &Phase::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_non_finite_frequency() {
        assert!(TorusFlow::new(vec![f64::NAN], true).is_err());
        assert!(TorusFlow::new(vec![], true).is_err());
    }

    #[test]
    fn golden_orbit_becomes_dense() {
        let flow = TorusFlow::new(vec![1.0, 0.6180339887498949], true).unwrap();
        let start = Phase::zeros(2);
        let orbit: Vec<Phase> = (0..4000)
            .map(|k| flow.advance(&start, 0.37 * k as f64))
            .collect();
        // every cell centre of a 10x10 grid is 0.05-close to the orbit
        for i in 0..10 {
            for j in 0..10 {
                let c = Phase::new(vec![0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64]);
                let best = orbit
                    .iter()
                    .map(|p| phase_distance(p, &c).unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 0.05, "cell ({i},{j}) missed: {best}");
            }
        }
    }

    proptest! {
        #[test]
        fn group_property(a in 0.0..1.0f64, b in 0.0..1.0f64, s in -50.0..50.0f64, t in -50.0..50.0f64) {
            let flow = TorusFlow::new(vec![1.0, 0.6180339887498949], true).unwrap();
            let th = Phase::new(vec![a, b]);
            let lhs = flow.advance(&flow.advance(&th, s), t);
            let rhs = flow.advance(&th, t + s);
            prop_assert!(phase_distance(&lhs, &rhs).unwrap() < 1e-12);
        }

        #[test]
        fn reversible(a in 0.0..1.0f64, t in -100.0..100.0f64) {
            let flow = TorusFlow::new(vec![std::f64::consts::FRAC_1_SQRT_2], true).unwrap();
            let th = Phase::new(vec![a]);
            let back = flow.advance(&flow.advance(&th, t), -t);
            prop_assert!(phase_distance(&back, &th).unwrap() < 1e-12);
        }

        #[test]
        fn distance_symmetric(a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let (pa, pb) = (Phase::new(vec![a]), Phase::new(vec![b]));
            let d1 = phase_distance(&pa, &pb).unwrap();
            prop_assert!((d1 - phase_distance(&pb, &pa).unwrap()).abs() < 1e-15);
            prop_assert!((0.0..=0.5).contains(&d1));
            prop_assert!(pa.coords()[0] >= 0.0 && pa.coords()[0] < 1.0);
        }
    }
}
