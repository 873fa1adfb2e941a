//! LR B-spline spaces: a mesh together with its LR B-spline set.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bspline::{find_refining_split, has_minimal_support, to_f64, univariate, univariate_derivative};
use crate::bspline::{FunctionKey, TensorBSpline};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mesh::{Direction, Element, Mesh, Rect, Split};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LRSpace {
    mesh: Mesh,
    functions: BTreeMap<FunctionKey, BigRational>,
}

impl LRSpace {
    /// Tensor B-splines on an open tensor mesh, all with weight 1.
    pub fn initial(mesh: Mesh) -> Result<LRSpace> {
        if !mesh.is_open() {
            return Err(Error::NotOpenTensor("boundary multiplicity is not full".into()));
        }
        LRSpace::tensor(mesh)
    }

    /// Tensor B-splines on any tensor mesh (boundary multiplicities arbitrary).
    pub fn tensor(mesh: Mesh) -> Result<LRSpace> {
        if !mesh.is_tensor() {
            return Err(Error::NotOpenTensor("mesh has interior T-vertices".into()));
        }
        let windows = |dir: Direction| -> Vec<Vec<Dyadic>> {
            let (slo, shi) = mesh.domain().span_range(dir);
            let mut global = Vec::new();
            for a in mesh.positions(dir) {
                let m = mesh.multiplicity_over(dir, a, slo, shi);
                global.extend(std::iter::repeat_n(a, m as usize));
            }
            let p = mesh.degree(dir) as usize;
            global
                .windows(p + 2)
                .filter(|w| w[0] < w[p + 1])
                .map(|w| w.to_vec())
                .collect()
        };
        let xs = windows(Direction::Vertical);
        let ys = windows(Direction::Horizontal);
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::NotOpenTensor("not enough knot lines for a single B-spline".into()));
        }
        let mut functions = BTreeMap::new();
        for x in &xs {
            for y in &ys {
                functions.insert(FunctionKey { x: x.clone(), y: y.clone() }, BigRational::one());
            }
        }
        Ok(LRSpace { mesh, functions })
    }

    /// Open tensor space with uniform cells.
    pub fn uniform(domain: Rect, bidegree: (u32, u32), n_cells: (u32, u32)) -> Result<LRSpace> {
        LRSpace::initial(Mesh::open_tensor(domain, bidegree, n_cells)?)
    }

    /// Generates the LR B-spline set of an arbitrary LR-mesh: starts from the
    /// tensor mesh of its domain-crossing lines and inserts the remaining
    /// meshlines whenever they are anchored.
    pub fn from_mesh(target: &Mesh) -> Result<LRSpace> {
        let mut per_dir: [Vec<(Dyadic, u32)>; 2] = [Vec::new(), Vec::new()];
        let dom = target.domain();
        for dir in Direction::BOTH {
            let (slo, shi) = dom.span_range(dir);
            for a in target.positions(dir) {
                let segs = target.segments(dir, a);
                if segs.len() == 1 && segs[0].lo == slo && segs[0].hi == shi {
                    per_dir[dir.index()].push((a, segs[0].mult));
                }
            }
        }
        let start = Mesh::tensor(target.bidegree(), &per_dir[0], &per_dir[1])?;
        let mut space = LRSpace::tensor(start)?;
        loop {
            let mut progress = false;
            let mut complete = true;
            for line in target.meshlines() {
                let dir = line.direction;
                let current = space.mesh.segments(dir, line.fixed).to_vec();
                for (lo, hi, have) in pieces(&current, line.span.0, line.span.1) {
                    if have >= line.multiplicity {
                        continue;
                    }
                    complete = false;
                    let split = Split::new(dir, line.fixed, lo, hi, line.multiplicity - have);
                    if space.insert_refine_mut(&split, false).is_ok() {
                        progress = true;
                        continue;
                    }
                    if have == 0 {
                        // Retry between crossing lines of the current mesh.
                        let mut cuts: Vec<Dyadic> = space
                            .mesh
                            .positions_between(dir.other(), lo, hi)
                            .filter(|(_, segs)| segs.iter().any(|s| s.lo <= line.fixed && line.fixed <= s.hi))
                            .map(|(&c, _)| c)
                            .collect();
                        cuts.insert(0, lo);
                        cuts.push(hi);
                        for w in cuts.windows(2) {
                            let piece = Split::new(dir, line.fixed, w[0], w[1], line.multiplicity);
                            if space.insert_refine_mut(&piece, false).is_ok() {
                                progress = true;
                            }
                        }
                    }
                }
            }
            if complete {
                break;
            }
            if !progress {
                return Err(Error::InvalidMesh(
                    "mesh cannot be generated by anchored split insertions".into(),
                ));
            }
        }
        if space.mesh != *target {
            return Err(Error::InvalidMesh("generated mesh differs from the input".into()));
        }
        Ok(space)
    }

    /// Rebuilds a space from stored parts, checking the invariants.
    pub fn from_parts(mesh: Mesh, functions: BTreeMap<FunctionKey, BigRational>) -> Result<LRSpace> {
        for (k, w) in &functions {
            if *w <= BigRational::from_integer(0.into()) {
                return Err(Error::Precondition(format!("weight of {k} is not positive")));
            }
            if k.bidegree() != mesh.bidegree() {
                return Err(Error::Precondition(format!("{k} has the wrong bidegree")));
            }
            if !has_minimal_support(k, &mesh) {
                return Err(Error::Precondition(format!("{k} lacks minimal support")));
            }
        }
        Ok(LRSpace { mesh, functions })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn bidegree(&self) -> (u32, u32) {
        self.mesh.bidegree()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &FunctionKey> + '_ {
        self.functions.keys()
    }

    pub fn contains(&self, key: &FunctionKey) -> bool {
        self.functions.contains_key(key)
    }

    pub fn weight(&self, key: &FunctionKey) -> Option<&BigRational> {
        self.functions.get(key)
    }

    pub fn weights(&self) -> &BTreeMap<FunctionKey, BigRational> {
        &self.functions
    }

    pub fn functions(&self) -> impl Iterator<Item = TensorBSpline> + '_ {
        self.functions
            .iter()
            .map(|(k, w)| TensorBSpline::from_key(k.clone(), w.clone()))
    }

    /// Inserts `split` and refines every B-spline that loses minimal support.
    pub fn apply_split(&self, split: &Split) -> Result<LRSpace> {
        let mut s = self.clone();
        s.insert_refine_mut(split, true)?;
        Ok(s)
    }

    /// Covers `{fixed} x [lo, hi]` (or its horizontal analogue) with
    /// multiplicity-1 meshlines where none exist yet, then refines.
    pub fn extend_meshline(&self, dir: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic) -> Result<LRSpace> {
        let mut s = self.clone();
        s.extend_meshline_mut(dir, fixed, lo, hi)?;
        Ok(s)
    }

    pub(crate) fn extend_meshline_mut(&mut self, dir: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic) -> Result<usize> {
        let mut work = self.mesh.clone();
        let inserted = work.extend_line_mut(dir, fixed, lo, hi)?;
        if inserted > 0 {
            self.mesh = work;
            self.refine_crossing(dir, fixed, lo, hi);
        }
        Ok(inserted)
    }

    /// Mesh insertion followed by the refinement fixpoint. With
    /// `require_traversal` the split must refine at least one B-spline.
    /// On error the space is unchanged.
    pub(crate) fn insert_refine_mut(&mut self, split: &Split, require_traversal: bool) -> Result<usize> {
        let mut mesh = self.mesh.clone();
        mesh.insert_split_mut(split)?;
        let saved = std::mem::replace(&mut self.mesh, mesh);
        let refined = self.refine_crossing(split.direction, split.fixed, split.span.0, split.span.1);
        if require_traversal && refined == 0 {
            self.mesh = saved;
            return Err(Error::NoTraversal);
        }
        Ok(refined)
    }

    /// Refines, until every function has minimal support, starting from the
    /// functions whose support interior meets the given segment. Returns the
    /// number of knot insertions.
    fn refine_crossing(&mut self, dir: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic) -> usize {
        let mut queue: BTreeSet<FunctionKey> = self
            .functions
            .keys()
            .filter(|k| {
                let s = k.support();
                let (flo, fhi) = s.fixed_range(dir);
                let (slo, shi) = s.span_range(dir);
                flo < fixed && fixed < fhi && slo < hi && lo < shi
            })
            .cloned()
            .collect();
        let mut count = 0;
        while let Some(key) = queue.pop_first() {
            let Some((d, alpha, _)) = find_refining_split(&key, &self.mesh) else {
                continue;
            };
            let Some(w) = self.functions.remove(&key) else {
                continue;
            };
            let b = TensorBSpline::from_key(key, w);
            let ((_, b1), (_, b2)) = b
                .insert_knot(d, alpha)
                .expect("refining line lies strictly inside the support");
            count += 1;
            for nb in [b1, b2] {
                *self
                    .functions
                    .entry(nb.key.clone())
                    .or_insert_with(|| BigRational::from_integer(0.into())) += nb.weight;
                queue.insert(nb.key);
            }
        }
        count
    }

    /// Halves the knot spans of every marked function: one support-crossing
    /// multiplicity-1 split per midpoint of consecutive distinct knots.
    pub fn structured_refine(&self, marked: &[FunctionKey]) -> Result<LRSpace> {
        let mut s = self.clone();
        s.structured_refine_mut(marked)?;
        Ok(s)
    }

    pub(crate) fn structured_refine_mut(&mut self, marked: &[FunctionKey]) -> Result<()> {
        let mut splits: BTreeMap<(Direction, Dyadic), Vec<(Dyadic, Dyadic)>> = BTreeMap::new();
        for key in marked {
            if !self.functions.contains_key(key) {
                return Err(Error::UnknownFunction(key.to_string()));
            }
            let s = key.support();
            for dir in Direction::BOTH {
                let (slo, shi) = s.span_range(dir);
                let knots = key.knots(dir);
                for w in knots.windows(2) {
                    if w[0] < w[1] {
                        splits.entry((dir, w[0].midpoint(w[1]))).or_default().push((slo, shi));
                    }
                }
            }
        }
        for ((dir, fixed), spans) in splits {
            for (lo, hi) in merge_spans(spans) {
                self.extend_meshline_mut(dir, fixed, lo, hi)?;
            }
        }
        Ok(())
    }

    /// Number of functions whose support contains the element.
    pub fn element_support_count(&self, element: &Element) -> usize {
        self.functions
            .keys()
            .filter(|k| k.support().contains_rect(&element.rect))
            .count()
    }

    /// Support count of every element, in element order.
    pub fn support_counts(&self) -> Vec<(Element, usize)> {
        let elements = self.mesh.elements();
        let mut counts = vec![0usize; elements.len()];
        // Elements sorted by x_min: restrict the scan per function.
        let xs: Vec<Dyadic> = elements.iter().map(|e| e.rect.x_min).collect();
        for k in self.functions.keys() {
            let s = k.support();
            let start = xs.partition_point(|&x| x < s.x_min);
            let end = xs.partition_point(|&x| x < s.x_max);
            for i in start..end {
                if s.contains_rect(&elements[i].rect) {
                    counts[i] += 1;
                }
            }
        }
        elements.into_iter().zip(counts).collect()
    }

    /// Elements supporting more than `(p1 + 1)(p2 + 1)` functions.
    pub fn overloaded_elements(&self) -> Vec<(Element, usize)> {
        let (p1, p2) = self.bidegree();
        let full = ((p1 + 1) * (p2 + 1)) as usize;
        self.support_counts().into_iter().filter(|&(_, c)| c > full).collect()
    }

    /// Every element carries exactly `(p1 + 1)(p2 + 1)` functions.
    pub fn is_locally_linearly_independent(&self) -> bool {
        let (p1, p2) = self.bidegree();
        let full = ((p1 + 1) * (p2 + 1)) as usize;
        self.support_counts().iter().all(|&(_, c)| c == full)
    }

    pub fn evaluator(&self, use_weights: bool) -> SpaceEvaluator {
        SpaceEvaluator::new(self, use_weights)
    }

    pub fn partition_of_unity_defect(&self, samples: &[(f64, f64)], use_weights: bool) -> f64 {
        let ev = self.evaluator(use_weights);
        samples
            .iter()
            .map(|&(x, y)| (1.0 - ev.sum(x, y)).abs())
            .fold(0.0, f64::max)
    }

    /// Element midpoints plus four jittered points per element.
    pub fn collocation_points(&self, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for e in self.mesh.elements() {
            let [x0, x1, y0, y1] = e.rect.to_f64();
            pts.push(e.rect.center());
            for _ in 0..4 {
                let u: f64 = rng.gen_range(0.05..0.95);
                let v: f64 = rng.gen_range(0.05..0.95);
                pts.push((x0 + u * (x1 - x0), y0 + v * (y1 - y0)));
            }
        }
        pts
    }

    /// Numerical rank of the collocation matrix at relative tolerance 1e-9.
    pub fn collocation_rank(&self, points: &[(f64, f64)]) -> usize {
        let ev = self.evaluator(false);
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(points.len().max(n), n);
        for (r, &(x, y)) in points.iter().enumerate() {
            for (j, v) in ev.values(x, y) {
                a[(r, j)] = v;
            }
        }
        let sv = a.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > 1e-9 * max).count()
    }

    /// Functions selected by `pred`.
    pub fn mark<F: Fn(&FunctionKey) -> bool>(&self, pred: F) -> Vec<FunctionKey> {
        self.functions.keys().filter(|k| pred(k)).cloned().collect()
    }
}

/// Splits `[lo, hi]` into maximal pieces of constant current multiplicity
/// (0 where uncovered).
fn pieces(segs: &[crate::mesh::Segment], lo: Dyadic, hi: Dyadic) -> Vec<(Dyadic, Dyadic, u32)> {
    let mut out = Vec::new();
    let mut at = lo;
    for s in segs {
        if s.hi <= at || s.lo >= hi {
            continue;
        }
        if s.lo > at {
            out.push((at, s.lo, 0));
        }
        let a = s.lo.max(at);
        let b = s.hi.min(hi);
        out.push((a, b, s.mult));
        at = b;
    }
    if at < hi {
        out.push((at, hi, 0));
    }
    out
}

fn merge_spans(mut spans: Vec<(Dyadic, Dyadic)>) -> Vec<(Dyadic, Dyadic)> {
    spans.sort();
    let mut out: Vec<(Dyadic, Dyadic)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Fast point evaluation of all functions of a space, with a uniform bucket
/// index over the domain.
pub struct SpaceEvaluator {
    knots: Vec<(Vec<f64>, Vec<f64>)>,
    weights: Vec<f64>,
    domain: [f64; 4],
    nb: (usize, usize),
    buckets: Vec<Vec<u32>>,
}

impl SpaceEvaluator {
    pub fn new(space: &LRSpace, use_weights: bool) -> Self {
        let domain = space.mesh.domain().to_f64();
        let n = space.len().max(1);
        let side = ((n as f64).sqrt() * 2.0).ceil().clamp(1.0, 512.0) as usize;
        let nb = (side, side);
        let mut buckets = vec![Vec::new(); nb.0 * nb.1];
        let mut knots = Vec::with_capacity(space.len());
        let mut weights = Vec::with_capacity(space.len());
        let (w, h) = (domain[1] - domain[0], domain[3] - domain[2]);
        for (i, (k, wt)) in space.functions.iter().enumerate() {
            let kx = to_f64(&k.x);
            let ky = to_f64(&k.y);
            let bi = |v: f64, lo: f64, len: f64, n: usize| -> usize {
                (((v - lo) / len * n as f64).floor().max(0.0) as usize).min(n - 1)
            };
            let i0 = bi(kx[0], domain[0], w, nb.0);
            let i1 = bi(*kx.last().unwrap(), domain[0], w, nb.0);
            let j0 = bi(ky[0], domain[2], h, nb.1);
            let j1 = bi(*ky.last().unwrap(), domain[2], h, nb.1);
            for bi_ in i0..=i1 {
                for bj in j0..=j1 {
                    buckets[bi_ * nb.1 + bj].push(i as u32);
                }
            }
            knots.push((kx, ky));
            weights.push(if use_weights { wt.to_f64().unwrap_or(f64::NAN) } else { 1.0 });
        }
        SpaceEvaluator { knots, weights, domain, nb, buckets }
    }

    fn bucket(&self, x: f64, y: f64) -> &[u32] {
        let d = self.domain;
        if x < d[0] || x > d[1] || y < d[2] || y > d[3] {
            return &[];
        }
        let i = (((x - d[0]) / (d[1] - d[0]) * self.nb.0 as f64).floor() as usize).min(self.nb.0 - 1);
        let j = (((y - d[2]) / (d[3] - d[2]) * self.nb.1 as f64).floor() as usize).min(self.nb.1 - 1);
        &self.buckets[i * self.nb.1 + j]
    }

    /// Whether `v` lies in the support interval of `t`: half-open, closed
    /// only at the domain end `end`.
    fn open_at(&self, t: &[f64], v: f64, end: f64) -> bool {
        let hi = t[t.len() - 1];
        t[0] <= v && (v < hi || v == hi && hi >= end)
    }

    /// Nonzero (index, value) pairs at a point; indices follow key order.
    pub fn values(&self, x: f64, y: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &i in self.bucket(x, y) {
            let (kx, ky) = &self.knots[i as usize];
            if !self.open_at(kx, x, self.domain[1]) || !self.open_at(ky, y, self.domain[3]) {
                continue;
            }
            let bx = univariate(kx, x);
            if bx == 0.0 {
                continue;
            }
            let by = univariate(ky, y);
            if by != 0.0 {
                out.push((i as usize, self.weights[i as usize] * bx * by));
            }
        }
        out
    }

    /// Nonzero (index, value, gradient) triples at a point.
    pub fn values_and_gradients(&self, x: f64, y: f64) -> Vec<(usize, f64, (f64, f64))> {
        let mut out = Vec::new();
        for &i in self.bucket(x, y) {
            let (kx, ky) = &self.knots[i as usize];
            if !self.open_at(kx, x, self.domain[1]) || !self.open_at(ky, y, self.domain[3]) {
                continue;
            }
            let w = self.weights[i as usize];
            let (bx, by) = (univariate(kx, x), univariate(ky, y));
            let (dx, dy) = (univariate_derivative(kx, x), univariate_derivative(ky, y));
            if bx == 0.0 && dx == 0.0 || by == 0.0 && dy == 0.0 {
                continue;
            }
            out.push((i as usize, w * bx * by, (w * dx * by, w * bx * dy)));
        }
        out
    }

    pub fn sum(&self, x: f64, y: f64) -> f64 {
        self.values(x, y).iter().map(|&(_, v)| v).sum()
    }

    /// `sum_i coeffs[i] * B_i(x, y)`.
    pub fn combine(&self, coeffs: &[f64], x: f64, y: f64) -> f64 {
        self.values(x, y).iter().map(|&(i, v)| coeffs[i] * v).sum()
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }
}

/// `n x n` grid including the domain boundary.
pub fn uniform_grid(domain: &Rect, n: (usize, usize)) -> Vec<(f64, f64)> {
    let [x0, x1, y0, y1] = domain.to_f64();
    let mut pts = Vec::with_capacity(n.0 * n.1);
    for i in 0..n.0 {
        let x = if n.0 == 1 { 0.5 * (x0 + x1) } else { x0 + (x1 - x0) * i as f64 / (n.0 - 1) as f64 };
        for j in 0..n.1 {
            let y = if n.1 == 1 { 0.5 * (y0 + y1) } else { y0 + (y1 - y0) * j as f64 / (n.1 - 1) as f64 };
            pts.push((x, y));
        }
    }
    pts
}

/// Uniformly random points in the domain.
pub fn random_points(domain: &Rect, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let [x0, x1, y0, y1] = domain.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(x0..=x1), rng.gen_range(y0..=y1)))
        .collect()
}
