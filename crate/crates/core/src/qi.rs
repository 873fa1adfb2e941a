//! Quasi-interpolation by local interpolation on one element.
//!
//! The coefficient of a B-spline `B` is the coefficient of `B` in the
//! interpolant of `f` at a `(p1+1) x (p2+1)` tensor grid of equispaced points
//! (element ends included) on a single element `U` of an open tensor mesh containing `B` among its basis.
//! For LR spaces that mesh is the local tensor mesh of `B` with its boundary
//! raised to full multiplicity.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::bspline::{to_f64, univariate_on_span, FunctionKey};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mesh::{distinct_with_mult, Mesh, Rect};
use crate::space::{uniform_grid, LRSpace};

/// Coefficient per function.
pub type QICoefficients = BTreeMap<FunctionKey, f64>;

/// Open knot vector of the local tensor space of a local knot vector:
/// end knots repeated `p + 1` times, interior multiplicities kept.
pub fn open_local_knots(t: &[Dyadic]) -> Vec<Dyadic> {
    let p = t.len() - 2;
    let (a, b) = (t[0], t[p + 1]);
    let mut out = vec![a; p + 1];
    out.extend(t.iter().copied().filter(|&k| a < k && k < b));
    out.extend(std::iter::repeat_n(b, p + 1));
    out
}

/// The open tensor space over the support of `origin`.
#[derive(Clone, Debug)]
pub struct LocalTensorSpace {
    pub origin: FunctionKey,
    pub mesh: Mesh,
    pub basis: Vec<FunctionKey>,
    knots: (Vec<Dyadic>, Vec<Dyadic>),
}

impl LocalTensorSpace {
    pub fn new(origin: &FunctionKey) -> Result<Self> {
        let kx = open_local_knots(&origin.x);
        let ky = open_local_knots(&origin.y);
        let xs = distinct_with_mult(&kx)?;
        let ys = distinct_with_mult(&ky)?;
        let mesh = Mesh::tensor(origin.bidegree(), &xs, &ys)?;
        let basis = LRSpace::initial(mesh.clone())?.keys().cloned().collect();
        Ok(LocalTensorSpace { origin: origin.clone(), mesh, basis, knots: (kx, ky) })
    }

    pub fn knots(&self) -> (&[Dyadic], &[Dyadic]) {
        (&self.knots.0, &self.knots.1)
    }

    /// Coefficient of the origin in the local interpolant of `f`.
    pub fn coefficient<F: Fn(f64, f64) -> f64>(&self, f: &F) -> Result<f64> {
        qi_coefficient(&self.knots.0, &self.knots.1, &self.origin, f)
    }
}

pub fn local_tensor_space(origin: &FunctionKey) -> Result<LocalTensorSpace> {
    LocalTensorSpace::new(origin)
}

/// Univariate part: index of the origin window in `global`, and the span
/// `[global[k], global[k+1])` chosen as interpolation element.
fn univariate_setup(global: &[Dyadic], local: &[Dyadic]) -> Result<(usize, usize)> {
    let p = local.len() - 2;
    let origin = (0..global.len().saturating_sub(p + 1))
        .find(|&i| global[i..i + p + 2] == *local)
        .ok_or_else(|| Error::Precondition("origin is not a window of the knot vector".into()))?;
    // Distinct spans of the origin; take the ceil(s/2)-th (1-based).
    let spans: Vec<usize> = (origin..origin + p + 1).filter(|&k| global[k] < global[k + 1]).collect();
    let u = spans[spans.len().div_ceil(2) - 1];
    Ok((origin, u))
}

/// Row of the inverse univariate collocation matrix on span `u` belonging to
/// window `origin`: weights `g` with coefficient = sum_i g_i * f(points_i).
fn univariate_weights(global: &[Dyadic], p: usize, origin: usize, u: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let g: Vec<f64> = to_f64(global);
    let (a, b) = (g[u], g[u + 1]);
    // Equispaced points including both element ends; the midpoint for p = 0.
    let pts: Vec<f64> = (0..=p)
        .map(|i| if p == 0 { (a + b) / 2.0 } else { a + i as f64 / p as f64 * (b - a) })
        .collect();
    // Functions nonzero on the span are windows u-p ..= u.
    let first = u - p;
    let mut m = DMatrix::<f64>::zeros(p + 1, p + 1);
    for (r, &x) in pts.iter().enumerate() {
        for c in 0..=p {
            m[(r, c)] = univariate_on_span(&g[first + c..first + c + p + 2], a, b, x);
        }
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular local interpolation matrix".into()))?;
    let row = origin - first;
    Ok(((0..=p).map(|j| inv[(row, j)]).collect(), pts))
}

/// Coefficient of `origin` when `f` is interpolated on one element of the
/// tensor space with global knot vectors `gx`, `gy`.
pub fn qi_coefficient<F: Fn(f64, f64) -> f64>(
    gx: &[Dyadic],
    gy: &[Dyadic],
    origin: &FunctionKey,
    f: &F,
) -> Result<f64> {
    let (p1, p2) = (origin.x.len() - 2, origin.y.len() - 2);
    let (ox, ux) = univariate_setup(gx, &origin.x)?;
    let (oy, uy) = univariate_setup(gy, &origin.y)?;
    let (wx, px) = univariate_weights(gx, p1, ox, ux)?;
    let (wy, py) = univariate_weights(gy, p2, oy, uy)?;
    let mut c = 0.0;
    for (i, &x) in px.iter().enumerate() {
        for (j, &y) in py.iter().enumerate() {
            c += wx[i] * wy[j] * f(x, y);
        }
    }
    Ok(c)
}

/// Quasi-interpolant of an LR space: each coefficient from the local tensor
/// space of its function.
pub fn lr_qi<F: Fn(f64, f64) -> f64>(space: &LRSpace, f: &F) -> Result<QICoefficients> {
    space
        .keys()
        .map(|k| {
            let gx = open_local_knots(&k.x);
            let gy = open_local_knots(&k.y);
            Ok((k.clone(), qi_coefficient(&gx, &gy, k, f)?))
        })
        .collect()
}

/// Tensor quasi-interpolant: coefficients computed on the global knot vectors
/// of a tensor space.
pub fn tensor_qi<F: Fn(f64, f64) -> f64>(space: &LRSpace, f: &F) -> Result<QICoefficients> {
    let mesh = space.mesh();
    if !mesh.is_tensor() {
        return Err(Error::NotOpenTensor("tensor quasi-interpolation needs a tensor mesh".into()));
    }
    let global = |dir| {
        let (slo, shi) = mesh.domain().span_range(dir);
        let mut g = Vec::new();
        for a in mesh.positions(dir) {
            let m = mesh.multiplicity_over(dir, a, slo, shi);
            g.extend(std::iter::repeat_n(a, m as usize));
        }
        g
    };
    let gx = global(crate::mesh::Direction::Vertical);
    let gy = global(crate::mesh::Direction::Horizontal);
    space
        .keys()
        .map(|k| Ok((k.clone(), qi_coefficient(&gx, &gy, k, f)?)))
        .collect()
}

/// Maximum of `|sum_B c_B B - f|` over a uniform inclusive grid, with the
/// unweighted basis.
pub fn qi_max_error<F: Fn(f64, f64) -> f64>(
    space: &LRSpace,
    coeffs: &QICoefficients,
    f: &F,
    grid: (usize, usize),
) -> f64 {
    let ev = space.evaluator(false);
    let c: Vec<f64> = space.keys().map(|k| coeffs.get(k).copied().unwrap_or(0.0)).collect();
    uniform_grid(&space.mesh().domain(), grid)
        .into_iter()
        .map(|(x, y)| (ev.combine(&c, x, y) - f(x, y)).abs())
        .fold(0.0, f64::max)
}

/// Three exponential peaks at (-0.3, -0.3), (0, 0) and (0.3, 0.3).
pub fn three_peaks(x: f64, y: f64) -> f64 {
    let peak = |a: f64, b: f64| (-((10.0 * x - a).powi(2) + (10.0 * y - b).powi(2)).sqrt()).exp();
    2.0 / 3.0 * (peak(3.0, 3.0) + peak(-3.0, -3.0) + peak(0.0, 0.0))
}

pub const PEAK_POINTS: [(f64, f64); 3] = [(-0.3, -0.3), (0.0, 0.0), (0.3, 0.3)];

/// Dense interpolation of `f` on a whole tensor space at a product grid of
/// Greville points. Returns one coefficient per basis function in key order.
pub fn dense_tensor_interpolation<F: Fn(f64, f64) -> f64>(space: &LRSpace, f: &F) -> Result<QICoefficients> {
    let keys: Vec<&FunctionKey> = space.keys().collect();
    let mut gx: Vec<f64> = keys.iter().map(|k| crate::bspline::greville(&k.x)).collect();
    let mut gy: Vec<f64> = keys.iter().map(|k| crate::bspline::greville(&k.y)).collect();
    for g in [&mut gx, &mut gy] {
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.dedup();
    }
    let pts: Vec<(f64, f64)> = gx.iter().flat_map(|&x| gy.iter().map(move |&y| (x, y))).collect();
    if pts.len() != keys.len() {
        return Err(Error::Precondition("Greville grid does not match the basis size".into()));
    }
    let ev = space.evaluator(false);
    let n = keys.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for (r, &(x, y)) in pts.iter().enumerate() {
        for (j, v) in ev.values(x, y) {
            a[(r, j)] = v;
        }
        rhs[r] = f(x, y);
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Greville interpolation".into()))?;
    Ok(keys.into_iter().cloned().zip(sol.iter().copied()).collect())
}

/// Max error helper for a tensor space of the given uniform size.
pub fn tensor_peaks_error(domain: Rect, bidegree: (u32, u32), cells: u32, grid: usize) -> Result<(usize, f64)> {
    let space = LRSpace::uniform(domain, bidegree, (cells, cells))?;
    let c = tensor_qi(&space, &three_peaks)?;
    Ok((space.len(), qi_max_error(&space, &c, &three_peaks, (grid, grid))))
}
