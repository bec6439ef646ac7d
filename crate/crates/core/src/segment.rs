//! History segments `x: [-r, 0] → ℝⁿ` stored as piecewise cubic Hermite data.
//!
//! Each breakpoint carries a value and two one-sided derivatives. They agree
//! for C¹ data; they differ where a solution has a derivative jump (for
//! example at `t = 0` when the initial history is not compatible with the
//! vector field).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the endpoints of `[-r, 0]`.
pub const DOMAIN_TOL: f64 = 1e-12;
/// Default number of interior samples per interval used by the norms.
pub const N_NORM: usize = 8;

/// Anything that can be read as a history function on `[-r, 0]`.
///
/// Delay functionals and vector fields see segments only through this trait,
/// so integrators can hand them lightweight views instead of materialized
/// [`Segment`]s.
pub trait History {
    fn max_delay(&self) -> f64;
    fn dim(&self) -> usize;
    /// Value at `s ∈ [-r, 0]`.
    fn value(&self, s: f64) -> DVector<f64>;
    /// Derivative at `s`, right-sided at interior breakpoints, left-sided at 0.
    fn deriv(&self, s: f64) -> DVector<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    r: f64,
    dim: usize,
    mesh: Vec<f64>,
    /// Row-major `mesh.len() × dim`.
    values: Vec<f64>,
    /// Derivative at `mesh[k]` seen from the interval on its right
    /// (at the last node: from the left).
    d_right: Vec<f64>,
    /// Derivative at `mesh[k]` seen from the interval on its left
    /// (at the first node: equal to `d_right`).
    d_left: Vec<f64>,
}

/// Which one-sided derivative to read at a breakpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Segment {
    /// C¹ Hermite data: one derivative per breakpoint.
    pub fn from_hermite(
        r: f64,
        mesh: Vec<f64>,
        values: Vec<DVector<f64>>,
        derivs: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let dim = values.first().map(|v| v.len()).unwrap_or(0);
        let flat = |vs: &[DVector<f64>]| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(vs.len() * dim);
            for v in vs {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
                out.extend(v.iter());
            }
            Ok(out)
        };
        let vals = flat(&values)?;
        let ders = flat(&derivs)?;
        Self::from_parts(r, dim, mesh, vals, ders.clone(), ders)
    }

    /// Full constructor from flat row-major arrays.
    pub fn from_parts(
        r: f64,
        dim: usize,
        mut mesh: Vec<f64>,
        values: Vec<f64>,
        d_right: Vec<f64>,
        d_left: Vec<f64>,
    ) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::MalformedSegment(format!("r = {r} must be positive")));
        }
        if dim == 0 {
            return Err(Error::MalformedSegment("dimension must be positive".into()));
        }
        let m = mesh.len();
        if m < 2 {
            return Err(Error::MalformedSegment("mesh needs at least two points".into()));
        }
        if (mesh[0] + r).abs() > DOMAIN_TOL * r.max(1.0) || mesh[m - 1].abs() > DOMAIN_TOL * r.max(1.0) {
            return Err(Error::MalformedSegment(format!(
                "mesh must run from -r = {} to 0, got [{}, {}]",
                -r,
                mesh[0],
                mesh[m - 1]
            )));
        }
        mesh[0] = -r;
        mesh[m - 1] = 0.0;
        if mesh.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MalformedSegment("mesh must be strictly increasing".into()));
        }
        for (name, arr) in [("values", &values), ("derivs", &d_right), ("derivs_left", &d_left)] {
            if arr.len() != m * dim {
                return Err(Error::MalformedSegment(format!(
                    "{name} has {} entries, expected {}",
                    arr.len(),
                    m * dim
                )));
            }
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedSegment(format!("{name} not finite")));
            }
        }
        Ok(Self {
            r,
            dim,
            mesh,
            values,
            d_right,
            d_left,
        })
    }

    pub fn constant(r: f64, c: DVector<f64>) -> Self {
        let dim = c.len();
        let vals: Vec<f64> = c.iter().chain(c.iter()).copied().collect();
        Self::from_parts(r, dim, vec![-r, 0.0], vals, vec![0.0; 2 * dim], vec![0.0; 2 * dim])
            .expect("valid constant segment")
    }

    pub fn zeros(r: f64, dim: usize) -> Self {
        Self::constant(r, DVector::zeros(dim))
    }

    /// Samples `f` and its derivative `df` on a uniform mesh of `m` intervals.
    pub fn from_fn<F, D>(r: f64, m: usize, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> DVector<f64>,
        D: Fn(f64) -> DVector<f64>,
    {
        let m = m.max(1);
        let mesh: Vec<f64> = (0..=m).map(|k| -r + r * k as f64 / m as f64).collect();
        let values = mesh.iter().map(|&s| f(s)).collect();
        let derivs = mesh.iter().map(|&s| df(s)).collect();
        Self::from_hermite(r, mesh, values, derivs)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn node_value(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(self.row(&self.values, k))
    }

    pub fn node_deriv(&self, k: usize, side: Side) -> DVector<f64> {
        let arr = match side {
            Side::Left => &self.d_left,
            Side::Right => &self.d_right,
        };
        DVector::from_column_slice(self.row(arr, k))
    }

    /// True if some breakpoint carries a derivative jump.
    pub fn has_jumps(&self) -> bool {
        self.d_left
            .iter()
            .zip(&self.d_right)
            .skip(self.dim)
            .take((self.mesh.len() - 2) * self.dim)
            .any(|(a, b)| a != b)
    }

    fn row<'a>(&self, arr: &'a [f64], k: usize) -> &'a [f64] {
        &arr[k * self.dim..(k + 1) * self.dim]
    }

    fn check_domain(&self, s: f64) -> Result<f64> {
        let tol = DOMAIN_TOL * self.r.max(1.0);
        if s < -self.r - tol || s > tol || s.is_nan() {
            return Err(Error::Domain {
                value: s,
                lo: -self.r,
                hi: 0.0,
            });
        }
        Ok(s.clamp(-self.r, 0.0))
    }

    /// Interval index containing `s`; `s = 0` belongs to the last interval.
    pub(crate) fn locate(&self, s: f64) -> usize {
        let k = self.mesh.partition_point(|&m| m <= s);
        k.saturating_sub(1).min(self.mesh.len() - 2)
    }

    pub(crate) fn piece(&self, k: usize) -> Piece<'_> {
        Piece {
            t0: self.mesh[k],
            t1: self.mesh[k + 1],
            y0: self.row(&self.values, k),
            d0: self.row(&self.d_right, k),
            y1: self.row(&self.values, k + 1),
            d1: self.row(&self.d_left, k + 1),
        }
    }

    pub fn eval(&self, s: f64) -> Result<DVector<f64>> {
        let s = self.check_domain(s)?;
        Ok(self.value_unchecked(s))
    }

    pub fn eval_deriv(&self, s: f64) -> Result<DVector<f64>> {
        let s = self.check_domain(s)?;
        Ok(self.deriv_unchecked(s))
    }

    fn value_unchecked(&self, s: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.piece(self.locate(s)).value_into(s, out.as_mut_slice());
        out
    }

    fn deriv_unchecked(&self, s: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.piece(self.locate(s)).deriv_into(s, out.as_mut_slice());
        out
    }

    /// One-sided derivative at `s` (which need not be a breakpoint).
    pub fn deriv_one_sided(&self, s: f64, side: Side) -> Result<DVector<f64>> {
        let s = self.check_domain(s)?;
        let k = match side {
            Side::Right => self.locate(s),
            Side::Left => {
                let k = self.mesh.partition_point(|&m| m < s);
                k.saturating_sub(1).min(self.mesh.len() - 2)
            }
        };
        let mut out = DVector::zeros(self.dim);
        self.piece(k).deriv_into(s, out.as_mut_slice());
        Ok(out)
    }

    /// `sup_s |x(s)|` (Euclidean magnitude).
    pub fn norm_c(&self) -> f64 {
        self.norms_with(N_NORM).0
    }

    /// `max(‖x‖_C, ess sup |ẋ|)`.
    pub fn norm_w(&self) -> f64 {
        let (c, d) = self.norms_with(N_NORM);
        c.max(d)
    }

    /// `(‖x‖_C, ‖ẋ‖_∞)` using `n_grid` interior samples per interval plus
    /// the closed-form extrema of each cubic piece.
    pub fn norms_with(&self, n_grid: usize) -> (f64, f64) {
        (0..self.mesh.len() - 1)
            .map(|k| self.piece(k).sup_norms(0.0, 1.0, n_grid))
            .fold((0.0, 0.0), |(a, b), (c, d)| (f64::max(a, c), f64::max(b, d)))
    }

    pub fn scale(&self, a: f64) -> Segment {
        let sc = |v: &[f64]| v.iter().map(|x| a * x).collect::<Vec<_>>();
        Segment {
            r: self.r,
            dim: self.dim,
            mesh: self.mesh.clone(),
            values: sc(&self.values),
            d_right: sc(&self.d_right),
            d_left: sc(&self.d_left),
        }
    }

    /// Pointwise `a·x + b·y` on the union of both meshes.
    pub fn combine(a: f64, x: &Segment, b: f64, y: &Segment) -> Result<Segment> {
        if (x.r - y.r).abs() > DOMAIN_TOL * x.r.max(1.0) {
            return Err(Error::Incompatible(format!("r = {} vs r = {}", x.r, y.r)));
        }
        if x.dim != y.dim {
            return Err(Error::Incompatible(format!("dim {} vs dim {}", x.dim, y.dim)));
        }
        if x.mesh == y.mesh {
            let lin = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| a * u + b * v).collect();
            return Ok(Segment {
                r: x.r,
                dim: x.dim,
                mesh: x.mesh.clone(),
                values: lin(&x.values, &y.values),
                d_right: lin(&x.d_right, &y.d_right),
                d_left: lin(&x.d_left, &y.d_left),
            });
        }
        let mesh = merge_meshes(&x.mesh, &y.mesh, DOMAIN_TOL * x.r.max(1.0));
        let dim = x.dim;
        let mut values = Vec::with_capacity(mesh.len() * dim);
        let mut d_right = Vec::with_capacity(mesh.len() * dim);
        let mut d_left = Vec::with_capacity(mesh.len() * dim);
        for &p in &mesh {
            let v = a * x.value_unchecked(p) + b * y.value_unchecked(p);
            let dr = a * x.deriv_one_sided(p, Side::Right)? + b * y.deriv_one_sided(p, Side::Right)?;
            let dl = a * x.deriv_one_sided(p, Side::Left)? + b * y.deriv_one_sided(p, Side::Left)?;
            values.extend(v.iter());
            d_right.extend(dr.iter());
            d_left.extend(dl.iter());
        }
        // endpoint conventions
        let last = mesh.len() - 1;
        for c in 0..dim {
            d_left[c] = d_right[c];
            d_right[last * dim + c] = d_left[last * dim + c];
        }
        Segment::from_parts(x.r, dim, mesh, values, d_right, d_left)
    }

    pub fn sub(&self, other: &Segment) -> Result<Segment> {
        Segment::combine(1.0, self, -1.0, other)
    }
}

impl History for Segment {
    fn max_delay(&self) -> f64 {
        self.r
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, s: f64) -> DVector<f64> {
        self.value_unchecked(s.clamp(-self.r, 0.0))
    }

    fn deriv(&self, s: f64) -> DVector<f64> {
        self.deriv_unchecked(s.clamp(-self.r, 0.0))
    }
}

fn merge_meshes(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for p in all {
        match out.last() {
            Some(&q) if p - q <= tol => {}
            _ => out.push(p),
        }
    }
    // keep the exact endpoint 0
    if let Some(l) = out.last_mut() {
        *l = 0.0;
    }
    out
}

/// One cubic Hermite piece over `[t0, t1]` (vector-valued, flat slices).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Piece<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub d0: &'a [f64],
    pub y1: &'a [f64],
    pub d1: &'a [f64],
}

impl Piece<'_> {
    pub fn value_into(&self, t: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        let u = (t - self.t0) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        for (i, o) in out.iter_mut().enumerate() {
            *o = h00 * self.y0[i] + h10 * h * self.d0[i] + h01 * self.y1[i] + h11 * h * self.d1[i];
        }
    }

    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        let u = (t - self.t0) / h;
        let u2 = u * u;
        let g00 = (6.0 * u2 - 6.0 * u) / h;
        let g10 = 3.0 * u2 - 4.0 * u + 1.0;
        let g01 = (-6.0 * u2 + 6.0 * u) / h;
        let g11 = 3.0 * u2 - 2.0 * u;
        for (i, o) in out.iter_mut().enumerate() {
            *o = g00 * self.y0[i] + g10 * self.d0[i] + g01 * self.y1[i] + g11 * self.d1[i];
        }
    }

    /// Power-basis coefficients in `u ∈ [0,1]` for component `i`.
    fn coeffs(&self, i: usize) -> [f64; 4] {
        let h = self.t1 - self.t0;
        let (y0, y1, m0, m1) = (self.y0[i], self.y1[i], h * self.d0[i], h * self.d1[i]);
        [
            y0,
            m0,
            -3.0 * y0 - 2.0 * m0 + 3.0 * y1 - m1,
            2.0 * y0 + m0 - 2.0 * y1 + m1,
        ]
    }

    /// Sup of `|y|` and `|ẏ|` over the sub-range `u ∈ [ua, ub]`.
    pub fn sup_norms(&self, ua: f64, ub: f64, n_grid: usize) -> (f64, f64) {
        let mut cands: Vec<f64> = Vec::with_capacity(n_grid + 2 + 3 * self.y0.len());
        cands.push(ua);
        cands.push(ub);
        for k in 1..=n_grid {
            cands.push(ua + (ub - ua) * k as f64 / (n_grid + 1) as f64);
        }
        for i in 0..self.y0.len() {
            let [_, c1, c2, c3] = self.coeffs(i);
            // p'(u) = c1 + 2 c2 u + 3 c3 u²
            for root in quadratic_roots(3.0 * c3, 2.0 * c2, c1) {
                cands.push(root);
            }
            // p''(u) = 2 c2 + 6 c3 u
            if c3 != 0.0 {
                cands.push(-c2 / (3.0 * c3));
            }
        }
        let dim = self.y0.len();
        let mut buf = vec![0.0; dim];
        let (mut sv, mut sd) = (0.0f64, 0.0f64);
        let h = self.t1 - self.t0;
        for u in cands.into_iter().filter(|u| *u >= ua && *u <= ub) {
            let t = self.t0 + u * h;
            self.value_into(t, &mut buf);
            sv = sv.max(euclid(&buf));
            if u == 0.0 {
                sd = sd.max(euclid(self.d0));
            } else if u == 1.0 {
                sd = sd.max(euclid(self.d1));
            } else {
                self.deriv_into(t, &mut buf);
                sd = sd.max(euclid(&buf));
            }
        }
        (sv, sd)
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> impl Iterator<Item = f64> {
    let mut roots = [f64::NAN; 2];
    if a.abs() < 1e-300 {
        if b != 0.0 {
            roots[0] = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots[0] = q / a;
            if q != 0.0 {
                roots[1] = c / q;
            }
        }
    }
    roots.into_iter().filter(|x| x.is_finite())
}

#[derive(Serialize, Deserialize)]
struct SegmentJson {
    r: f64,
    dim: usize,
    mesh: Vec<f64>,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    derivs_left: Option<Vec<Vec<f64>>>,
}

impl Serialize for Segment {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = |arr: &[f64]| arr.chunks(self.dim).map(<[f64]>::to_vec).collect::<Vec<_>>();
        SegmentJson {
            r: self.r,
            dim: self.dim,
            mesh: self.mesh.clone(),
            values: rows(&self.values),
            derivs: rows(&self.d_right),
            derivs_left: self.has_jumps().then(|| rows(&self.d_left)),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = SegmentJson::deserialize(de)?;
        let flat = |rows: &[Vec<f64>]| rows.iter().flatten().copied().collect::<Vec<_>>();
        let d_right = flat(&j.derivs);
        let mut d_left = j.derivs_left.as_deref().map(flat).unwrap_or_else(|| d_right.clone());
        if d_left.len() == d_right.len() && j.dim > 0 && !d_left.is_empty() {
            d_left[..j.dim].copy_from_slice(&d_right[..j.dim]);
        }
        if j.values.iter().any(|v| v.len() != j.dim) {
            return Err(serde::de::Error::custom("value row length differs from dim"));
        }
        Segment::from_parts(j.r, j.dim, j.mesh, flat(&j.values), d_right, d_left)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn scalar(r: f64, m: usize, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Segment {
        Segment::from_fn(r, m, |s| dvector![f(s)], |s| dvector![df(s)]).unwrap()
    }

    #[test]
    fn reproduces_polynomials() {
        let c = Segment::constant(1.0, dvector![1.0]);
        for s in [-1.0, -0.37, 0.0] {
            assert_eq!(c.eval(s).unwrap()[0], 1.0);
            assert_eq!(c.eval_deriv(s).unwrap()[0], 0.0);
        }
        let lin = scalar(1.0, 3, |s| s, |_| 1.0);
        assert!((lin.eval(-0.5).unwrap()[0] + 0.5).abs() < 1e-15);
        assert!((lin.eval_deriv(-0.123).unwrap()[0] - 1.0).abs() < 1e-14);
        let cub = scalar(1.0, 4, |s| s * s * s, |s| 3.0 * s * s);
        assert!((cub.eval(-0.3).unwrap()[0] + 0.027).abs() < 1e-15);
        let sq = scalar(1.0, 5, |s| s * s, |s| 2.0 * s);
        assert!((sq.eval_deriv(-0.5).unwrap()[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let c = Segment::zeros(1.0, 1);
        assert!(c.eval(-1.0 - 1e-13).is_ok());
        assert!(matches!(c.eval(-1.1), Err(Error::Domain { .. })));
        assert!(matches!(c.eval_deriv(0.01), Err(Error::Domain { .. })));
    }

    #[test]
    fn malformed_meshes() {
        let bad = Segment::from_parts(1.0, 1, vec![-1.0, -0.5, -0.5, 0.0], vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]);
        assert!(bad.is_err());
        let bad = Segment::from_parts(1.0, 1, vec![-0.9, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]);
        assert!(bad.is_err());
    }

    #[test]
    fn one_sided_derivatives_at_jump() {
        let seg = Segment::from_parts(
            2.0,
            1,
            vec![-2.0, -1.0, 0.0],
            vec![0.0, 1.0, 2.0],
            vec![1.0, 3.0, 1.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(seg.has_jumps());
        assert_eq!(seg.eval_deriv(-1.0).unwrap()[0], 3.0);
        assert_eq!(seg.deriv_one_sided(-1.0, Side::Left).unwrap()[0], 1.0);
        assert_eq!(seg.eval_deriv(0.0).unwrap()[0], 1.0);
        let back: Segment = serde_json::from_str(&serde_json::to_string(&seg).unwrap()).unwrap();
        assert_eq!(back, seg);
    }

    #[test]
    fn norms_of_simple_segments() {
        let c = Segment::constant(1.0, dvector![3.0, 4.0]);
        assert_eq!(c.norm_c(), 5.0);
        assert_eq!(c.norm_w(), 5.0);
        let lin = scalar(1.0, 1, |s| s, |_| 1.0);
        assert!((lin.norm_c() - 1.0).abs() < 1e-15);
        assert!((lin.norm_w() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norms_of_sine() {
        // sup |sin 10s| on [-1,0] is 1 (10s = -π/2 lies inside); sup |10 cos 10s| = 10 at s = 0.
        let seg = scalar(1.0, 400, |s| (10.0 * s).sin(), |s| 10.0 * (10.0 * s).cos());
        let (c, w) = (seg.norm_c(), seg.norm_w());
        assert!((0.999..=1.0 + 1e-9).contains(&c), "norm_C = {c}");
        assert!((9.99..=10.0 + 1e-9).contains(&w), "norm_W = {w}");
    }

    #[test]
    fn combine_examples() {
        let x = scalar(1.0, 7, |s| s.sin(), |s| s.cos());
        let y = scalar(1.0, 5, |s| s * s, |s| 2.0 * s);
        let same = Segment::combine(1.0, &x, 0.0, &y).unwrap();
        for &p in x.mesh() {
            assert!((same.eval(p).unwrap()[0] - x.eval(p).unwrap()[0]).abs() < 1e-15);
        }
        assert!(Segment::combine(1.0, &x, -1.0, &x).unwrap().norm_w() == 0.0);
        let eight = Segment::combine(
            2.0,
            &Segment::constant(1.0, dvector![1.0]),
            3.0,
            &Segment::constant(1.0, dvector![2.0]),
        )
        .unwrap();
        assert_eq!(eight.eval(-0.4).unwrap()[0], 8.0);
        assert!(Segment::combine(1.0, &x, 1.0, &Segment::zeros(2.0, 1)).is_err());
        assert!(Segment::combine(1.0, &x, 1.0, &Segment::zeros(1.0, 2)).is_err());
    }

    #[test]
    fn json_schema() {
        let x = scalar(1.0, 2, |s| s, |_| 1.0);
        let v: serde_json::Value = serde_json::to_value(&x).unwrap();
        assert_eq!(v["r"], 1.0);
        assert_eq!(v["mesh"].as_array().unwrap().len(), 3);
        assert_eq!(v["values"][1][0], -0.5);
        assert!(v.get("derivs_left").is_none());
    }

    #[test]
    fn fourth_order_interpolation() {
        let err = |m: usize| {
            let seg = scalar(1.0, m, |s| (3.0 * s).exp() * (5.0 * s).cos(), |s| {
                (3.0 * s).exp() * (3.0 * (5.0 * s).cos() - 5.0 * (5.0 * s).sin())
            });
            (0..=997)
                .map(|k| -1.0 + k as f64 / 997.0)
                .map(|s| (seg.eval(s).unwrap()[0] - (3.0 * s).exp() * (5.0 * s).cos()).abs())
                .fold(0.0, f64::max)
        };
        let errs: Vec<f64> = [8, 16, 32, 64].iter().map(|&m| err(m)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 3.5, "observed order {order} ({errs:?})");
        }
    }

    proptest! {
        #[test]
        fn c_norm_below_w_norm(vals in proptest::collection::vec(-5.0..5.0f64, 6), ders in proptest::collection::vec(-20.0..20.0f64, 6)) {
            let mesh: Vec<f64> = (0..6).map(|k| -1.5 + 0.3 * k as f64).collect();
            let seg = Segment::from_parts(1.5, 1, mesh, vals, ders.clone(), ders).unwrap();
            prop_assert!(seg.norm_c() <= seg.norm_w());
        }

        #[test]
        fn combine_is_bilinear(a in -3.0..3.0f64, b in -3.0..3.0f64, w1 in 0.5..4.0f64, w2 in 0.5..4.0f64, m1 in 1usize..9, m2 in 1usize..9) {
            let x = scalar(1.0, m1, |s| (w1 * s).sin(), |s| w1 * (w1 * s).cos());
            let y = scalar(1.0, m2, |s| (w2 * s).cos(), |s| -w2 * (w2 * s).sin());
            let z = Segment::combine(a, &x, b, &y).unwrap();
            for k in 0..100 {
                let s = -1.0 + k as f64 / 99.0;
                let direct = a * x.eval(s).unwrap()[0] + b * y.eval(s).unwrap()[0];
                prop_assert!((z.eval(s).unwrap()[0] - direct).abs() < 1e-12);
            }
        }
    }
}
