//! Galerkin discretization of `-Δu = f` on the parameter domain with Dirichlet
//! data, and the adaptive sharp-layer experiment.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::bspline::{greville, to_f64, univariate, FunctionKey};
use crate::error::{Error, Result};
use crate::mesh::Rect;
use crate::n2s::{self, PipelineOptions};
use crate::space::{uniform_grid, LRSpace};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).map(|k| self.vals[self.row_ptr[i] + k]).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Stiffness matrix and load vector in key order, before boundary conditions.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub keys: Vec<FunctionKey>,
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub dirichlet: BTreeMap<usize, f64>,
}

/// Element-by-element assembly with `(p1+1) x (p2+1)` Gauss points, unweighted basis.
pub fn assemble<F: Fn(f64, f64) -> f64>(space: &LRSpace, f: &F) -> Result<GalerkinSystem> {
    assemble_with(space, f, f64::INFINITY)
}

/// Default sub-cell size of the load rule, relative to the domain width.
pub const LOAD_CELL: f64 = 1.0 / 256.0;

/// As [`assemble`], with the load integrated by the same Gauss rule on a
/// uniform subdivision of each element into cells no wider than `load_cell`
/// (relative to the domain). Needed for sources with thin layers.
pub fn assemble_with<F: Fn(f64, f64) -> f64>(space: &LRSpace, f: &F, load_cell: f64) -> Result<GalerkinSystem> {
    let (p1, p2) = space.bidegree();
    let full = ((p1 + 1) * (p2 + 1)) as usize;
    let (gx, wx) = gauss_legendre(p1 as usize + 1);
    let (gy, wy) = gauss_legendre(p2 as usize + 1);
    let [dx0, dx1, dy0, dy1] = space.mesh().domain().to_f64();
    let (cw, ch) = (load_cell * (dx1 - dx0), load_cell * (dy1 - dy0));
    let ev = space.evaluator(false);
    let n = space.len();
    let mut trip = Vec::new();
    let mut load = vec![0.0; n];
    for e in space.mesh().elements() {
        let [x0, x1, y0, y1] = e.rect.to_f64();
        let (cx, cy) = e.rect.center();
        let active = ev.values(cx, cy).len();
        if active > full {
            return Err(Error::Overloaded { element: format!("{:?}", e.rect.to_f64()), count: active, expected: full });
        }
        let (hx, hy) = ((x1 - x0) / 2.0, (y1 - y0) / 2.0);
        let mut local: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, &u) in gx.iter().enumerate() {
            for (b, &v) in gy.iter().enumerate() {
                let (x, y) = (x0 + hx * (u + 1.0), y0 + hy * (v + 1.0));
                let w = wx[a] * wy[b] * hx * hy;
                let vg = ev.values_and_gradients(x, y);
                for &(i, _, gi) in &vg {
                    for &(j, _, gj) in &vg {
                        *local.entry((i, j)).or_insert(0.0) += w * (gi.0 * gj.0 + gi.1 * gj.1);
                    }
                }
            }
        }
        let sub = |len: f64, cell: f64| if cell.is_finite() { (len / cell).ceil().max(1.0) as usize } else { 1 };
        let (nx, ny) = (sub(x1 - x0, cw), sub(y1 - y0, ch));
        let (sx, sy) = (hx / nx as f64, hy / ny as f64);
        for ix in 0..nx {
            for iy in 0..ny {
                let (ox, oy) = (x0 + 2.0 * sx * ix as f64, y0 + 2.0 * sy * iy as f64);
                for (a, &u) in gx.iter().enumerate() {
                    for (b, &v) in gy.iter().enumerate() {
                        let (x, y) = (ox + sx * (u + 1.0), oy + sy * (v + 1.0));
                        let w = wx[a] * wy[b] * sx * sy * f(x, y);
                        for (i, bi) in ev.values(x, y) {
                            load[i] += w * bi;
                        }
                    }
                }
            }
        }
        trip.extend(local.into_iter().map(|((i, j), v)| (i, j, v)));
    }
    Ok(GalerkinSystem {
        keys: space.keys().cloned().collect(),
        stiffness: CsrMatrix::from_triplets(n, trip),
        load,
        dirichlet: BTreeMap::new(),
    })
}

/// Boundary coefficients by univariate interpolation of `u_d` at the Greville
/// abscissae of the traces along each edge.
pub fn boundary_coefficients<F: Fn(f64, f64) -> f64>(space: &LRSpace, u_d: &F) -> Result<BTreeMap<usize, f64>> {
    let (p1, p2) = space.bidegree();
    let [dx0, dx1, dy0, dy1] = space.mesh().domain().to_f64();
    let keys: Vec<&FunctionKey> = space.keys().collect();
    let mut out = BTreeMap::new();
    // (fixed coordinate, edge is vertical, at the lower end)
    let edges = [(dx0, true, true), (dx1, true, false), (dy0, false, true), (dy1, false, false)];
    for (fixed, vertical, lower) in edges {
        let mut trace: Vec<(usize, Vec<f64>)> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            let (across, along, p) = if vertical { (&k.x, &k.y, p1) } else { (&k.y, &k.x, p2) };
            let t = to_f64(across);
            let touches = if lower {
                t[..=p as usize].iter().all(|&v| v == fixed)
            } else {
                t[1..].iter().all(|&v| v == fixed)
            };
            if touches {
                trace.push((i, to_f64(along)));
            }
        }
        let pts: Vec<f64> = trace
            .iter()
            .map(|(i, _)| greville(if vertical { &keys[*i].y } else { &keys[*i].x }))
            .collect();
        let m = trace.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (r, &s) in pts.iter().enumerate() {
            for (c, (_, t)) in trace.iter().enumerate() {
                a[(r, c)] = univariate(t, s);
            }
            rhs[r] = if vertical { u_d(fixed, s) } else { u_d(s, fixed) };
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular boundary interpolation".into()))?;
        for (c, (i, _)) in trace.iter().enumerate() {
            out.entry(*i).or_insert(sol[c]);
        }
    }
    Ok(out)
}

/// System on the free coefficients, with the boundary contributions moved to
/// the right-hand side.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub n: usize,
    pub free: Vec<usize>,
    pub fixed: BTreeMap<usize, f64>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

pub fn impose_dirichlet<F: Fn(f64, f64) -> f64>(
    system: &mut GalerkinSystem,
    space: &LRSpace,
    u_d: &F,
) -> Result<ReducedSystem> {
    system.dirichlet = boundary_coefficients(space, u_d)?;
    Ok(reduce(system))
}

pub fn reduce(system: &GalerkinSystem) -> ReducedSystem {
    let n = system.keys.len();
    let fixed = system.dirichlet.clone();
    let mut index = vec![usize::MAX; n];
    let free: Vec<usize> = (0..n).filter(|i| !fixed.contains_key(i)).collect();
    for (r, &i) in free.iter().enumerate() {
        index[i] = r;
    }
    let mut trip = Vec::new();
    let mut rhs = Vec::with_capacity(free.len());
    for (r, &i) in free.iter().enumerate() {
        let mut b = system.load[i];
        for (j, v) in system.stiffness.row(i) {
            match fixed.get(&j) {
                Some(g) => b -= v * g,
                None => trip.push((r, index[j], v)),
            }
        }
        rhs.push(b);
    }
    ReducedSystem { n, matrix: CsrMatrix::from_triplets(free.len(), trip), rhs, free, fixed }
}

/// Jacobi-preconditioned conjugate gradients to relative residual `tol`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Numerical("nonpositive diagonal entry".into()));
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Numerical("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!("conjugate gradients did not converge in {max_iter} iterations")))
}

pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Full coefficient vector in key order.
pub fn solve(reduced: &ReducedSystem) -> Result<Vec<f64>> {
    let m = reduced.free.len();
    let x = conjugate_gradient(&reduced.matrix, &reduced.rhs, SOLVER_TOLERANCE, 20 * m.max(50))?;
    let mut c = vec![0.0; reduced.n];
    for (&i, &v) in &reduced.fixed {
        c[i] = v;
    }
    for (r, &i) in reduced.free.iter().enumerate() {
        c[i] = x[r];
    }
    Ok(c)
}

/// Assemble, impose `u_d` on the boundary and solve.
pub fn solve_poisson<F, G>(space: &LRSpace, f: &F, u_d: &G) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let mut sys = assemble_with(space, f, LOAD_CELL)?;
    let red = impose_dirichlet(&mut sys, space, u_d)?;
    solve(&red)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub n_functions: usize,
    pub linf: f64,
    pub l2: f64,
}

/// Discrete max error and cell-averaged L2 error on an inclusive `n x n` grid.
pub fn error_norms<F: Fn(f64, f64) -> f64>(space: &LRSpace, coeffs: &[f64], u: &F, grid: usize) -> ErrorReport {
    let domain = space.mesh().domain();
    let ev = space.evaluator(false);
    let pts = uniform_grid(&domain, (grid, grid));
    let err: Vec<f64> = pts.iter().map(|&(x, y)| ev.combine(coeffs, x, y) - u(x, y)).collect();
    let linf = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let [x0, x1, y0, y1] = domain.to_f64();
    let cell = (x1 - x0) * (y1 - y0) / ((grid - 1) * (grid - 1)) as f64;
    let mut sum = 0.0;
    for i in 0..grid - 1 {
        for j in 0..grid - 1 {
            let e = |a: usize, b: usize| err[a * grid + b].powi(2);
            sum += (e(i, j) + e(i + 1, j) + e(i, j + 1) + e(i + 1, j + 1)) / 4.0;
        }
    }
    ErrorReport { n_functions: space.len(), linf, l2: (sum * cell).sqrt() }
}

/// Circular arctan layer `atan(100 (r - R))` around an off-domain center.
pub mod layer {
    use super::PI;

    pub const CENTER: (f64, f64) = (1.25, -0.25);
    pub const RADIUS: f64 = PI / 3.0;
    pub const STEEPNESS: f64 = 100.0;

    pub fn solution(x: f64, y: f64) -> f64 {
        let r = (x - CENTER.0).hypot(y - CENTER.1);
        (STEEPNESS * (r - RADIUS)).atan()
    }

    /// `-Δu` of [`solution`].
    pub fn source(x: f64, y: f64) -> f64 {
        let r = (x - CENTER.0).hypot(y - CENTER.1);
        let s = STEEPNESS * (r - RADIUS);
        let q = 1.0 + s * s;
        let ur = STEEPNESS / q;
        let urr = -2.0 * STEEPNESS * STEEPNESS * s / (q * q);
        -(urr + ur / r)
    }
}

/// Functions whose support straddles the circle of the layer.
pub fn mark_by_layer(center: (f64, f64), radius: f64) -> impl Fn(&FunctionKey) -> bool {
    n2s::markers::circle(center, radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Tensor,
    N2s2,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Tensor => "tensor",
            Strategy::N2s2 => "n2s2",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelReport {
    pub strategy: Strategy,
    pub level: u32,
    #[serde(flatten)]
    pub report: ErrorReport,
}

/// Spaces for levels `2..=max_level` on the unit square: uniform tensor
/// meshes with `2^level` cells per side, or the N2S2 pipeline driven by the
/// layer marker from the 4 x 4 mesh.
pub fn level_spaces(strategy: Strategy, max_level: u32, bidegree: (u32, u32), options: PipelineOptions) -> Result<Vec<LRSpace>> {
    if max_level < 2 {
        return Err(Error::Precondition("levels start at 2".into()));
    }
    let domain = Rect::unit_square();
    match strategy {
        Strategy::Tensor => (2..=max_level)
            .map(|l| LRSpace::uniform(domain, bidegree, (1 << l, 1 << l)))
            .collect(),
        Strategy::N2s2 => {
            let start = LRSpace::uniform(domain, bidegree, (4, 4))?;
            let mut out = vec![start.clone()];
            let marker = mark_by_layer(layer::CENTER, layer::RADIUS);
            n2s::n2s_pipeline_with(&start, &marker, (max_level - 2) as usize, options, |_, s| out.push(s.clone()))?;
            Ok(out)
        }
    }
}

/// Solve the layer problem on every level and measure the error.
pub fn adaptive_solve(
    strategy: Strategy,
    max_level: u32,
    bidegree: (u32, u32),
    grid: usize,
    options: PipelineOptions,
) -> Result<Vec<LevelReport>> {
    level_spaces(strategy, max_level, bidegree, options)?
        .iter()
        .zip(2..)
        .map(|(s, level)| {
            let c = solve_poisson(s, &layer::source, &layer::solution)?;
            Ok(LevelReport { strategy, level, report: error_norms(s, &c, &layer::solution, grid) })
        })
        .collect()
}

/// Log-log interpolation of a reference error curve `(n, err)` at `n`;
/// `None` outside its range.
pub fn interpolate_loglog(curve: &[(usize, f64)], n: usize) -> Option<f64> {
    let x = (n as f64).ln();
    curve.windows(2).find_map(|w| {
        let (a, b) = ((w[0].0 as f64).ln(), (w[1].0 as f64).ln());
        if a <= x && x <= b {
            let t = if b > a { (x - a) / (b - a) } else { 0.0 };
            Some((w[0].1.ln() * (1.0 - t) + w[1].1.ln() * t).exp())
        } else {
            None
        }
    })
}
