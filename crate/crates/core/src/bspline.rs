//! Bivariate B-splines on local knot vectors.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mesh::{distinct_with_mult, Direction, Mesh, Rect};

/// Identity of a B-spline: its two local knot vectors.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunctionKey {
    pub x: Vec<Dyadic>,
    pub y: Vec<Dyadic>,
}

impl fmt::Debug for FunctionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B[{:?}, {:?}]", self.x, self.y)
    }
}

impl fmt::Display for FunctionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &[Dyadic]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "x=({}) y=({})", show(&self.x), show(&self.y))
    }
}

impl FunctionKey {
    pub fn new(x: Vec<Dyadic>, y: Vec<Dyadic>) -> Result<Self> {
        check_knots(&x)?;
        check_knots(&y)?;
        Ok(FunctionKey { x, y })
    }

    pub fn knots(&self, dir: Direction) -> &[Dyadic] {
        match dir {
            Direction::Vertical => &self.x,
            Direction::Horizontal => &self.y,
        }
    }

    pub fn bidegree(&self) -> (u32, u32) {
        ((self.x.len() - 2) as u32, (self.y.len() - 2) as u32)
    }

    pub fn support(&self) -> Rect {
        Rect {
            x_min: self.x[0],
            x_max: *self.x.last().unwrap(),
            y_min: self.y[0],
            y_max: *self.y.last().unwrap(),
        }
    }

    /// The middle knot span in each direction (the two middle spans for odd
    /// degree): `[t_{floor(p/2)}, t_{ceil(p/2)+1}]`.
    pub fn central_box(&self) -> Rect {
        let mid = |t: &[Dyadic]| {
            let p = t.len() - 2;
            (t[p / 2], t[p.div_ceil(2) + 1])
        };
        let (x_min, x_max) = mid(&self.x);
        let (y_min, y_max) = mid(&self.y);
        Rect { x_min, x_max, y_min, y_max }
    }

    /// Number of occurrences of `z` among the knots of direction `dir`.
    pub fn knot_multiplicity(&self, dir: Direction, z: Dyadic) -> u32 {
        self.knots(dir).iter().filter(|&&k| k == z).count() as u32
    }

    fn with_knots(&self, dir: Direction, knots: Vec<Dyadic>) -> FunctionKey {
        match dir {
            Direction::Vertical => FunctionKey { x: knots, y: self.y.clone() },
            Direction::Horizontal => FunctionKey { x: self.x.clone(), y: knots },
        }
    }
}

/// Checks a local knot vector: nondecreasing, at least 3 entries,
/// non-degenerate, no value repeated more than `p + 1` times.
pub fn check_knots(knots: &[Dyadic]) -> Result<()> {
    if knots.len() < 3 {
        return Err(Error::InvalidKnots(format!("{knots:?} is shorter than 3")));
    }
    let p = knots.len() - 2;
    let d = distinct_with_mult(knots)?;
    if d.len() < 2 {
        return Err(Error::InvalidKnots(format!("{knots:?} has empty support")));
    }
    if d.iter().any(|&(_, m)| m as usize > p + 1) {
        return Err(Error::InvalidKnots(format!("{knots:?} repeats a knot more than p+1 times")));
    }
    Ok(())
}

/// `weight * B_x(x) * B_y(y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorBSpline {
    pub key: FunctionKey,
    pub weight: BigRational,
}

impl TensorBSpline {
    pub fn new(x: Vec<Dyadic>, y: Vec<Dyadic>) -> Result<Self> {
        Ok(TensorBSpline { key: FunctionKey::new(x, y)?, weight: BigRational::one() })
    }

    pub fn from_key(key: FunctionKey, weight: BigRational) -> Self {
        TensorBSpline { key, weight }
    }

    pub fn weight_f64(&self) -> f64 {
        self.weight.to_f64().unwrap_or(f64::NAN)
    }

    pub fn support(&self) -> Rect {
        self.key.support()
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.weight_f64() * self.evaluate_unweighted(x, y)
    }

    pub fn evaluate_unweighted(&self, x: f64, y: f64) -> f64 {
        let bx = univariate(&to_f64(&self.key.x), x);
        if bx == 0.0 {
            return 0.0;
        }
        bx * univariate(&to_f64(&self.key.y), y)
    }

    pub fn evaluate_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let (kx, ky) = (to_f64(&self.key.x), to_f64(&self.key.y));
        let w = self.weight_f64();
        let (bx, dx) = (univariate(&kx, x), univariate_derivative(&kx, x));
        let (by, dy) = (univariate(&ky, y), univariate_derivative(&ky, y));
        (w * dx * by, w * bx * dy)
    }

    /// Splits `B` by inserting `z` in direction `dir`:
    /// `B = a1 * B1 + a2 * B2` with both coefficients in (0, 1].
    /// The returned splines carry `weight * a1` and `weight * a2`.
    pub fn insert_knot(
        &self,
        dir: Direction,
        z: Dyadic,
    ) -> Result<((BigRational, TensorBSpline), (BigRational, TensorBSpline))> {
        let ((a1, k1), (a2, k2)) = insert_knot_univariate(self.key.knots(dir), z)?;
        let b1 = TensorBSpline::from_key(self.key.with_knots(dir, k1), &self.weight * &a1);
        let b2 = TensorBSpline::from_key(self.key.with_knots(dir, k2), &self.weight * &a2);
        Ok(((a1, b1), (a2, b2)))
    }
}

/// Univariate knot insertion on `t_0..t_{p+1}`.
pub fn insert_knot_univariate(
    t: &[Dyadic],
    z: Dyadic,
) -> Result<((BigRational, Vec<Dyadic>), (BigRational, Vec<Dyadic>))> {
    let p = t.len() - 2;
    let (first, last) = (t[0], t[p + 1]);
    if !(first < z && z < last) {
        return Err(Error::KnotOutsideSupport { z: format!("{z:?}") });
    }
    let mut aug = t.to_vec();
    let pos = aug.partition_point(|&k| k <= z);
    aug.insert(pos, z);
    if aug.iter().filter(|&&k| k == z).count() > p + 1 {
        return Err(Error::InvalidKnots(format!("inserting {z:?} exceeds multiplicity {}", p + 1)));
    }
    let a1 = if z >= t[p] { BigRational::one() } else { (z - first).ratio(t[p] - first) };
    let a2 = if z <= t[1] { BigRational::one() } else { (last - z).ratio(last - t[1]) };
    debug_assert!(a1 > BigRational::zero() && a2 > BigRational::zero());
    let k1 = aug[..p + 2].to_vec();
    let k2 = aug[1..].to_vec();
    Ok(((a1, k1), (a2, k2)))
}

pub(crate) fn to_f64(knots: &[Dyadic]) -> Vec<f64> {
    knots.iter().map(|k| k.to_f64()).collect()
}

/// Univariate B-spline on local knots `t`, half-open per span. The right end
/// is included when the last knot is repeated `p + 1` times, so that open
/// knot vectors are interpolatory at the right boundary.
pub fn univariate(t: &[f64], x: f64) -> f64 {
    let p = t.len() - 2;
    let (a, b) = (t[0], t[p + 1]);
    if x < a || x > b {
        return 0.0;
    }
    if x == b {
        return if t[1] == b { 1.0 } else { 0.0 };
    }
    let mut n = degree_zero(t, x);
    for d in 1..=p {
        for i in 0..=p - d {
            let mut v = 0.0;
            let den1 = t[i + d] - t[i];
            if den1 > 0.0 {
                v += (x - t[i]) / den1 * n[i];
            }
            let den2 = t[i + d + 1] - t[i + 1];
            if den2 > 0.0 {
                v += (t[i + d + 1] - x) / den2 * n[i + 1];
            }
            n[i] = v;
        }
    }
    n[0]
}

/// Polynomial piece of a univariate B-spline on the span `[lo, hi]`, evaluated
/// at `x` (also outside the span). `[lo, hi]` must be a nonempty span of `t`.
pub fn univariate_on_span(t: &[f64], lo: f64, hi: f64, x: f64) -> f64 {
    let p = t.len() - 2;
    let mut n: Vec<f64> = (0..=p).map(|i| if t[i] == lo && t[i + 1] == hi { 1.0 } else { 0.0 }).collect();
    for d in 1..=p {
        for i in 0..=p - d {
            let mut v = 0.0;
            let den1 = t[i + d] - t[i];
            if den1 > 0.0 {
                v += (x - t[i]) / den1 * n[i];
            }
            let den2 = t[i + d + 1] - t[i + 1];
            if den2 > 0.0 {
                v += (t[i + d + 1] - x) / den2 * n[i + 1];
            }
            n[i] = v;
        }
    }
    n[0]
}

/// Derivative of [`univariate`]; one-sided (from the left) at a closed right end.
pub fn univariate_derivative(t: &[f64], x: f64) -> f64 {
    let p = t.len() - 2;
    if p == 0 {
        return 0.0;
    }
    let (a, b) = (t[0], t[p + 1]);
    if x < a || x > b {
        return 0.0;
    }
    let left = &t[..p + 1];
    let right = &t[1..];
    let eval = |k: &[f64]| -> f64 {
        if x == b {
            // Limit from the left.
            let pk = k.len() - 2;
            if k[pk + 1] == b && k[1] == b {
                1.0
            } else if k[pk + 1] == b {
                0.0
            } else {
                univariate(k, x)
            }
        } else {
            univariate(k, x)
        }
    };
    let mut v = 0.0;
    let den1 = t[p] - t[0];
    if den1 > 0.0 {
        v += p as f64 * eval(left) / den1;
    }
    let den2 = t[p + 1] - t[1];
    if den2 > 0.0 {
        v -= p as f64 * eval(right) / den2;
    }
    v
}

fn degree_zero(t: &[f64], x: f64) -> Vec<f64> {
    (0..t.len() - 1)
        .map(|i| if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 })
        .collect()
}

/// Whether the knot mesh of `key` is a union of meshlines of `mesh` with
/// multiplicities at least the knot multiplicities.
pub fn has_support_on(key: &FunctionKey, mesh: &Mesh) -> bool {
    let s = key.support();
    if !mesh.domain().contains_rect(&s) {
        return false;
    }
    Direction::BOTH.iter().all(|&dir| {
        let (lo, hi) = s.span_range(dir);
        match distinct_with_mult(key.knots(dir)) {
            Ok(d) => d.iter().all(|&(z, m)| mesh.multiplicity_over(dir, z, lo, hi) >= m),
            Err(_) => false,
        }
    })
}

/// A line `(dir, alpha)` crossing the whole support whose mesh multiplicity
/// exceeds the knot multiplicity, with the deficit. Smallest direction first,
/// then smallest position.
pub fn find_refining_split(key: &FunctionKey, mesh: &Mesh) -> Option<(Direction, Dyadic, u32)> {
    let s = key.support();
    for dir in Direction::BOTH {
        let (lo, hi) = s.fixed_range(dir);
        let (slo, shi) = s.span_range(dir);
        let knots = key.knots(dir);
        for (&alpha, segs) in mesh.positions_between(dir, lo, hi) {
            let m = crate::mesh::coverage(segs, slo, shi);
            if m == 0 {
                continue;
            }
            let mu = knots.iter().filter(|&&k| k == alpha).count() as u32;
            if m > mu {
                return Some((dir, alpha, m - mu));
            }
        }
    }
    None
}

pub fn has_minimal_support(key: &FunctionKey, mesh: &Mesh) -> bool {
    has_support_on(key, mesh) && find_refining_split(key, mesh).is_none()
}

/// Greville abscissa: mean of the interior knots.
pub fn greville(knots: &[Dyadic]) -> f64 {
    let p = knots.len() - 2;
    if p == 0 {
        return 0.5 * (knots[0].to_f64() + knots[1].to_f64());
    }
    knots[1..=p].iter().map(|k| k.to_f64()).sum::<f64>() / p as f64
}
