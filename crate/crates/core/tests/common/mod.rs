#![allow(dead_code)]

use std::collections::BTreeSet;

use lrspline::n2s::{markers, n2s_pipeline, n2s_pipeline_with, structured_pipeline, PipelineOptions};
use lrspline::qi::PEAK_POINTS;
use lrspline::{Direction, Dyadic, FunctionKey, LRSpace, Mesh, Meshline, Rect, Split};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn d(n: i64) -> Dyadic {
    Dyadic::from_int(n)
}

/// `n / 2^e`.
pub fn q(n: i64, e: u32) -> Dyadic {
    Dyadic::new(n, e).unwrap()
}

pub fn ints(v: &[i64]) -> Vec<Dyadic> {
    v.iter().map(|&n| d(n)).collect()
}

pub fn key(x: &[i64], y: &[i64]) -> FunctionKey {
    FunctionKey::new(ints(x), ints(y)).unwrap()
}

pub fn rect(x0: i64, x1: i64, y0: i64, y1: i64) -> Rect {
    Rect::new(d(x0), d(x1), d(y0), d(y1)).unwrap()
}

pub fn vline(x: Dyadic, y0: Dyadic, y1: Dyadic) -> Meshline {
    Meshline { direction: Direction::Vertical, fixed: x, span: (y0, y1), multiplicity: 1 }
}

pub fn hline(y: Dyadic, x0: Dyadic, x1: Dyadic) -> Meshline {
    Meshline { direction: Direction::Horizontal, fixed: y, span: (x0, x1), multiplicity: 1 }
}

pub fn with_mult(mut l: Meshline, m: u32) -> Meshline {
    l.multiplicity = m;
    l
}

/// Boundary lines with the given multiplicities (left, right, bottom, top).
pub fn boundary(domain: Rect, mult: [u32; 4]) -> Vec<Meshline> {
    vec![
        with_mult(vline(domain.x_min, domain.y_min, domain.y_max), mult[0]),
        with_mult(vline(domain.x_max, domain.y_min, domain.y_max), mult[1]),
        with_mult(hline(domain.y_min, domain.x_min, domain.x_max), mult[2]),
        with_mult(hline(domain.y_max, domain.x_min, domain.x_max), mult[3]),
    ]
}

pub fn mesh_with(domain: Rect, bidegree: (u32, u32), bmult: [u32; 4], interior: &[Meshline]) -> Mesh {
    let mut lines = boundary(domain, bmult);
    lines.extend_from_slice(interior);
    Mesh::from_lines(domain, bidegree, &lines).unwrap()
}

/// Element count by a plane sweep over the line arrangement: cells of each
/// vertical strip, minus adjacencies across strip borders not covered by a
/// vertical line.
pub fn sweep_element_count(mesh: &Mesh) -> usize {
    let lines = mesh.meshlines();
    let by = |dir| lines.iter().filter(move |l: &&Meshline| l.direction == dir);
    let xs: Vec<Dyadic> = by(Direction::Vertical).map(|l| l.fixed).collect::<BTreeSet<_>>().into_iter().collect();
    let strip_cells = |x0: Dyadic, x1: Dyadic| -> Vec<(Dyadic, Dyadic)> {
        let ys: Vec<Dyadic> = by(Direction::Horizontal)
            .filter(|l| l.span.0 <= x0 && x1 <= l.span.1)
            .map(|l| l.fixed)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        ys.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let covered = |x: Dyadic, y0: Dyadic, y1: Dyadic| {
        by(Direction::Vertical).any(|l| l.fixed == x && l.span.0 <= y0 && y1 <= l.span.1)
    };
    let strips: Vec<Vec<(Dyadic, Dyadic)>> = xs.windows(2).map(|w| strip_cells(w[0], w[1])).collect();
    let mut count: usize = strips.iter().map(Vec::len).sum();
    for i in 1..strips.len() {
        let x = xs[i];
        for c in &strips[i] {
            if strips[i - 1].contains(c) && !covered(x, c.0, c.1) {
                count -= 1;
            }
        }
    }
    count
}

/// True iff no interior vertex is the end of a line of orientation `dir`.
pub fn no_t_vertices(mesh: &Mesh, dir: Direction) -> bool {
    let dom = mesh.domain();
    let lines = mesh.meshlines();
    let (flo, fhi) = dom.fixed_range(dir);
    let (slo, shi) = dom.span_range(dir);
    for l in lines.iter().filter(|l| l.direction == dir && flo < l.fixed && l.fixed < fhi) {
        for end in [l.span.0, l.span.1] {
            if end == slo || end == shi {
                continue;
            }
            // Continues through `end` iff collinear coverage exists on both sides.
            let before = lines.iter().any(|m| m.direction == dir && m.fixed == l.fixed && m.span.0 < end && end <= m.span.1);
            let after = lines.iter().any(|m| m.direction == dir && m.fixed == l.fixed && m.span.0 <= end && end < m.span.1);
            if !(before && after) {
                return false;
            }
        }
    }
    true
}

/// Rank of the evaluation matrix on a unisolvent set of `(p1+1)(p2+1)` points
/// per element, from singular values.
pub fn dense_rank(space: &LRSpace) -> usize {
    let (p1, p2) = space.bidegree();
    let fx: Vec<f64> = (0..=p1).map(|i| (i as f64 + 0.5) / (p1 + 1) as f64).collect();
    let fy: Vec<f64> = (0..=p2).map(|i| (i as f64 + 0.5) / (p2 + 1) as f64).collect();
    let mut pts = Vec::new();
    for e in space.mesh().element_rects() {
        let [x0, x1, y0, y1] = e.to_f64();
        for &a in &fx {
            for &b in &fy {
                pts.push((x0 + a * (x1 - x0), y0 + b * (y1 - y0)));
            }
        }
    }
    let fns: Vec<_> = space.functions().collect();
    let m = DMatrix::from_fn(pts.len(), fns.len(), |i, j| fns[j].evaluate_unweighted(pts[i].0, pts[i].1));
    let sv = m.singular_values();
    let tol = sv.max() * 1e-9;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Three-peaks N2S2 spaces on `[-1, 1]^2`, levels `1..=levels`.
pub fn peaks_spaces(levels: usize) -> Vec<LRSpace> {
    let one = d(1);
    let dom = Rect::new(-one, one, -one, one).unwrap();
    let start = LRSpace::uniform(dom, (2, 2), (4, 4)).unwrap();
    let marker = markers::central_contains_any(&PEAK_POINTS);
    let mut out = vec![start.clone()];
    n2s_pipeline_with(&start, &marker, levels - 1, PipelineOptions::default(), |_, s| out.push(s.clone())).unwrap();
    out
}

/// Degree-(2,2) structured sequence on the uniform 4x4 unit-square mesh: the
/// function on `[0, 3/4] x [1/4, 1]` is refined, then the function with
/// support `[1/4, 5/8] x [3/8, 3/4]`.
pub fn structured_two_step() -> (LRSpace, LRSpace) {
    let s = LRSpace::uniform(Rect::unit_square(), (2, 2), (4, 4)).unwrap();
    let b = FunctionKey::new(vec![d(0), q(1, 2), q(1, 1), q(3, 2)], vec![q(1, 2), q(1, 1), q(3, 2), d(1)]).unwrap();
    let first = s.structured_refine(&[b]).unwrap();
    let target = Rect::new(q(1, 2), q(5, 3), q(3, 3), q(3, 2)).unwrap();
    let marked = first.mark(|k| k.support() == target);
    assert_eq!(marked.len(), 1);
    let second = first.structured_refine(&marked).unwrap();
    (first, second)
}

/// Degree-(4,4) two-step structured sequence on the 9x9 mesh of `[0, 9]^2`.
pub fn dependent_degree_four() -> LRSpace {
    let s = LRSpace::uniform(rect(0, 9, 0, 9), (4, 4), (9, 9)).unwrap();
    let r: Vec<i64> = (0..=5).collect();
    let s = s
        .structured_refine(&[key(&r, &[4, 5, 6, 7, 8, 9]), key(&[4, 5, 6, 7, 8, 9], &r)])
        .unwrap();
    let halves = |a: i64| -> Vec<Dyadic> { (a..a + 6).map(|n| q(n, 1)).collect() };
    let a = FunctionKey::new(halves(5), halves(8)).unwrap();
    let b = FunctionKey::new(halves(8), halves(5)).unwrap();
    s.structured_refine(&[a, b]).unwrap()
}

/// Mesh of seven full and five partial interior lines of multiplicity 1 on
/// `[0, 8] x [0, 6]`, with boundary multiplicity `bm`.
pub fn dependence_mesh(bm: u32) -> Mesh {
    let interior = [
        vline(d(1), d(0), d(6)),
        vline(d(2), d(0), d(6)),
        vline(d(5), d(0), d(6)),
        vline(d(7), d(0), d(6)),
        vline(d(3), d(0), d(4)),
        vline(d(4), d(1), d(6)),
        vline(d(6), d(1), d(5)),
        hline(d(1), d(0), d(8)),
        hline(d(3), d(0), d(8)),
        hline(d(5), d(0), d(8)),
        hline(d(2), d(2), d(8)),
        hline(d(4), d(0), d(6)),
    ];
    mesh_with(rect(0, 8, 0, 6), (2, 2), [bm; 4], &interior)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Local knot vector of degree `p` on the quarter grid of `[0, 4]`, plus a
/// knot `z` that can be inserted without overflowing multiplicity.
pub fn random_knots_and_insertion(r: &mut impl Rng, p: usize) -> (Vec<Dyadic>, Dyadic) {
    loop {
        let mut t: Vec<i64> = (0..p + 2).map(|_| r.gen_range(0..=16)).collect();
        t.sort();
        if t[0] == t[p + 1] || t.iter().any(|a| t.iter().filter(|&b| b == a).count() > p + 1) {
            continue;
        }
        // Candidate z on the eighth grid strictly inside the support.
        let z = r.gen_range(2 * t[0] + 1..2 * t[p + 1]);
        let zq = q(z, 3);
        let knots: Vec<Dyadic> = t.iter().map(|&n| q(n, 2)).collect();
        if knots.iter().filter(|&&k| k == zq).count() + 1 > p + 1 {
            continue;
        }
        return (knots, zq);
    }
}

/// Uniform open tensor space on `[0, n]^2` with random bidegree and a set of
/// new splits at distinct half-integer positions, each spanning at least
/// `p + 2` cells of the integer grid.
pub fn random_split_set(r: &mut impl Rng) -> (LRSpace, Vec<Split>) {
    let bidegree = (r.gen_range(1..=3), r.gen_range(1..=3));
    let n = r.gen_range(5..=8i64);
    let space = LRSpace::uniform(rect(0, n, 0, n), bidegree, (n as u32, n as u32)).unwrap();
    let count = r.gen_range(2..=5);
    let mut used: BTreeSet<(Direction, i64)> = BTreeSet::new();
    let mut splits = Vec::new();
    while splits.len() < count {
        let dir = if r.gen_bool(0.5) { Direction::Vertical } else { Direction::Horizontal };
        let i = r.gen_range(0..n);
        if !used.insert((dir, i)) {
            continue;
        }
        let p_span = match dir {
            Direction::Vertical => bidegree.1,
            Direction::Horizontal => bidegree.0,
        } as i64;
        let len = r.gen_range((p_span + 2).min(n)..=n);
        let a = r.gen_range(0..=n - len);
        let alpha = q(2 * i + 1, 1);
        splits.push(Split::new(dir, alpha, d(a), d(a + len), 1));
    }
    (space, splits)
}

/// Random tensor space with non-uniform breakpoints refined by local
/// horizontal splits only.
pub fn random_vertically_tensorized(r: &mut impl Rng) -> LRSpace {
    let bidegree = (r.gen_range(1..=3u32), r.gen_range(1..=3u32));
    let breaks = |r: &mut dyn rand::RngCore, p: u32| -> Vec<(Dyadic, u32)> {
        let mut v: BTreeSet<i64> = [0, 16].into();
        let k = r.gen_range(4..=8);
        while v.len() < k + 2 {
            v.insert(r.gen_range(1..16));
        }
        let last = *v.iter().last().unwrap();
        v.into_iter().map(|x| (q(x, 1), if x == 0 || x == last { p + 1 } else { 1 })).collect()
    };
    let xs = breaks(r, bidegree.0);
    let ys = breaks(r, bidegree.1);
    let mut s = LRSpace::tensor(Mesh::tensor(bidegree, &xs, &ys).unwrap()).unwrap();
    let nx = xs.len() - 1;
    let mut used = BTreeSet::new();
    for _ in 0..r.gen_range(2..=6) {
        // New horizontal line inside a random y-cell, at its midpoint.
        let j = r.gen_range(0..ys.len() - 1);
        let y = ys[j].0.midpoint(ys[j + 1].0);
        if !used.insert(j) {
            continue;
        }
        let len = r.gen_range((bidegree.0 as usize + 2).min(nx)..=nx);
        let a = r.gen_range(0..=nx - len);
        s = s.apply_split(&Split::horizontal(y, xs[a].0, xs[a + len].0)).unwrap();
    }
    s
}

/// Small structured-pipeline space (nested pairs expected) on the unit
/// square, refined around random points.
pub fn random_structured_space(r: &mut impl Rng) -> LRSpace {
    let bidegree = (r.gen_range(1..=3u32), r.gen_range(1..=3u32));
    let cells = [1u32, 2, 4][r.gen_range(0..3)];
    let start = LRSpace::uniform(Rect::unit_square(), bidegree, (cells, cells)).unwrap();
    let pts: Vec<(f64, f64)> = (0..r.gen_range(1..=2)).map(|_| (r.gen::<f64>(), r.gen::<f64>())).collect();
    let iters = r.gen_range(1..=3);
    structured_pipeline(&start, markers::support_contains_any(&pts), iters).unwrap().0
}

/// Small N2S2 space on the unit square, refined around random points.
pub fn random_n2s_space(r: &mut impl Rng) -> LRSpace {
    let bidegree = (r.gen_range(1..=3u32), r.gen_range(1..=3u32));
    let start = LRSpace::uniform(Rect::unit_square(), bidegree, (2, 2)).unwrap();
    let pts: Vec<(f64, f64)> = (0..r.gen_range(1..=2)).map(|_| (r.gen::<f64>(), r.gen::<f64>())).collect();
    let iters = r.gen_range(1..=3);
    n2s_pipeline(&start, markers::support_contains_any(&pts), iters, PipelineOptions::default()).unwrap().0
}

/// Random polynomial of bidegree at most `(p1, p2)` with coefficients in [-1, 1].
pub fn random_polynomial(r: &mut impl Rng, (p1, p2): (u32, u32)) -> impl Fn(f64, f64) -> f64 {
    let c: Vec<Vec<f64>> = (0..=p1).map(|_| (0..=p2).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    move |x, y| {
        c.iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, a)| a * x.powi(i as i32) * y.powi(j as i32)).sum::<f64>())
            .sum()
    }
}
