//! Nestedness detection, tensor expansions and structured refinement that
//! keeps the non-nested support property.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::bspline::FunctionKey;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mesh::{mesh_from_knots, Direction, Mesh, Rect};
use crate::space::LRSpace;

/// `inner` is nested in `outer` by comparing knot multiplicities.
pub fn is_nested_knotwise(inner: &FunctionKey, outer: &FunctionKey) -> bool {
    if inner == outer {
        return false;
    }
    Direction::BOTH.iter().all(|&dir| {
        let (k2, k1) = (inner.knots(dir), outer.knots(dir));
        let (a2, b2) = (k2[0], k2[k2.len() - 1]);
        let (a1, b1) = (k1[0], k1[k1.len() - 1]);
        let mu = |k: &[Dyadic], z: Dyadic| k.iter().filter(|&&t| t == z).count();
        k1.iter().chain(k2.iter()).all(|&z| {
            let (m2, m1) = (mu(k2, z), mu(k1, z));
            let inside_inner = a2 < z && z < b2;
            let outside_outer = !(a1 < z && z < b1);
            (!inside_inner || m2 >= m1) && (!outside_outer || m2 <= m1)
        })
    })
}

/// `inner` is nested in `outer` by support inclusion and boundary
/// multiplicities on the shared meshlines of `mesh`.
pub fn is_nested_meshwise(inner: &FunctionKey, outer: &FunctionKey, mesh: &Mesh) -> bool {
    if inner == outer {
        return false;
    }
    let (s2, s1) = (inner.support(), outer.support());
    if !s1.contains_rect(&s2) {
        return false;
    }
    let (Ok(m2), Ok(m1)) = (
        mesh_from_knots(&inner.x, &inner.y),
        mesh_from_knots(&outer.x, &outer.y),
    ) else {
        return false;
    };
    for dir in Direction::BOTH {
        let (lo1, hi1) = s1.fixed_range(dir);
        let (lo2, hi2) = s2.fixed_range(dir);
        let (slo, shi) = s2.span_range(dir);
        for z in [lo1, hi1] {
            if z != lo2 && z != hi2 {
                continue;
            }
            // Shared boundary: {z} x [slo, shi], walked meshline by meshline.
            for seg in mesh.segments(dir, z) {
                let (a, b) = (seg.lo.max(slo), seg.hi.min(shi));
                if a >= b {
                    continue;
                }
                if m1.multiplicity_over(dir, z, a, b) < m2.multiplicity_over(dir, z, a, b) {
                    return false;
                }
            }
        }
    }
    true
}

/// Outer function -> set of functions nested in it. Empty iff the space
/// has the non-nested support property.
pub fn nested_map(space: &LRSpace) -> BTreeMap<FunctionKey, BTreeSet<FunctionKey>> {
    let index = SupportIndex::new(space);
    let mut out: BTreeMap<FunctionKey, BTreeSet<FunctionKey>> = BTreeMap::new();
    for (i, outer) in index.keys.iter().enumerate() {
        let inners = index.nested_in(i);
        if !inners.is_empty() {
            out.insert((*outer).clone(), inners.into_iter().map(|j| index.keys[j].clone()).collect());
        }
    }
    out
}

/// Functions nested in `outer`.
pub fn nested_in(space: &LRSpace, outer: &FunctionKey) -> Vec<FunctionKey> {
    let s1 = outer.support();
    space
        .keys()
        .filter(|k| s1.contains_rect(&k.support()) && is_nested_knotwise(k, outer))
        .cloned()
        .collect()
}

struct SupportIndex<'a> {
    keys: Vec<&'a FunctionKey>,
    supports: Vec<Rect>,
}

impl<'a> SupportIndex<'a> {
    fn new(space: &'a LRSpace) -> Self {
        let mut keys: Vec<&FunctionKey> = space.keys().collect();
        keys.sort_by_key(|k| k.support());
        let supports = keys.iter().map(|k| k.support()).collect();
        SupportIndex { keys, supports }
    }

    /// Indices of functions nested in function `i`.
    fn nested_in(&self, i: usize) -> Vec<usize> {
        let s1 = self.supports[i];
        let start = self.supports.partition_point(|s| s.x_min < s1.x_min);
        let mut out = Vec::new();
        for j in start..self.supports.len() {
            let s2 = &self.supports[j];
            if s2.x_min >= s1.x_max {
                break;
            }
            if j != i && s1.contains_rect(s2) && is_nested_knotwise(self.keys[j], self.keys[i]) {
                out.push(j);
            }
        }
        out
    }

    /// First outer in (lower-left, upper-right) support order that has a nested function.
    fn first_outer(&self) -> Option<usize> {
        let mut order: Vec<usize> = (0..self.keys.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (&self.supports[a], &self.supports[b]);
            (sa.x_min, sa.y_min, sa.x_max, sa.y_max, self.keys[a])
                .cmp(&(sb.x_min, sb.y_min, sb.x_max, sb.y_max, self.keys[b]))
        });
        order.into_iter().find(|&i| !self.nested_in(i).is_empty())
    }
}

/// Extends, across the whole support of `outer`, every line of direction
/// `dir` carrying an interior knot of a function nested in `outer`.
/// Returns the space unchanged when every such line already crosses it.
pub fn one_directional_expansion(space: &LRSpace, outer: &FunctionKey, dir: Direction) -> Result<LRSpace> {
    let mut s = space.clone();
    expand_mut(&mut s, outer, &[dir])?;
    Ok(s)
}

/// Same as [`one_directional_expansion`] in both directions.
pub fn full_expansion(space: &LRSpace, outer: &FunctionKey) -> Result<LRSpace> {
    let mut s = space.clone();
    expand_mut(&mut s, outer, &Direction::BOTH)?;
    Ok(s)
}

fn expand_mut(space: &mut LRSpace, outer: &FunctionKey, dirs: &[Direction]) -> Result<usize> {
    if !space.contains(outer) {
        return Err(Error::UnknownFunction(outer.to_string()));
    }
    let inners = nested_in(space, outer);
    if inners.is_empty() {
        return Err(Error::Precondition(format!("no function is nested in {outer}")));
    }
    let s = outer.support();
    let mut inserted = 0;
    for &dir in dirs {
        let (lo, hi) = s.fixed_range(dir);
        let (slo, shi) = s.span_range(dir);
        let alphas: BTreeSet<Dyadic> = inners
            .iter()
            .flat_map(|k| k.knots(dir).iter().copied())
            .filter(|&a| lo < a && a < hi)
            .collect();
        for a in alphas {
            inserted += space.extend_meshline_mut(dir, a, slo, shi)?;
        }
    }
    Ok(inserted)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Parity {
    /// Odd iterations extend vertical lines.
    #[default]
    OddVertical,
    OddHorizontal,
}

impl Parity {
    pub fn direction(self, iteration: usize) -> Direction {
        let odd = iteration % 2 == 1;
        match (self, odd) {
            (Parity::OddVertical, true) | (Parity::OddHorizontal, false) => Direction::Vertical,
            _ => Direction::Horizontal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Expansion {
    #[default]
    OneDirectional,
    Full,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PipelineOptions {
    pub parity: Parity,
    pub expansion: Expansion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExpansionRecord {
    pub iter: usize,
    pub outer: FunctionKey,
    /// 1 or 2; 0 for a full expansion.
    pub dir: u8,
    pub n_functions_after: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RefinementTrace {
    pub expansions: Vec<ExpansionRecord>,
    /// Function count after each iteration (index 0 is the input space).
    pub counts: Vec<usize>,
}

impl RefinementTrace {
    /// One JSON object per line, one line per expansion.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.expansions {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// N2S2 refinement: per iteration, structured refinement of the marked
/// functions followed by expansions until no function is nested.
pub fn n2s_pipeline<M>(
    space: &LRSpace,
    marker: M,
    iterations: usize,
    options: PipelineOptions,
) -> Result<(LRSpace, RefinementTrace)>
where
    M: Fn(&FunctionKey) -> bool,
{
    n2s_pipeline_with(space, marker, iterations, options, |_, _| {})
}

/// [`n2s_pipeline`] with a callback receiving each iteration's final space.
pub fn n2s_pipeline_with<M, C>(
    space: &LRSpace,
    marker: M,
    iterations: usize,
    options: PipelineOptions,
    mut on_iteration: C,
) -> Result<(LRSpace, RefinementTrace)>
where
    M: Fn(&FunctionKey) -> bool,
    C: FnMut(usize, &LRSpace),
{
    let mut s = space.clone();
    let mut trace = RefinementTrace { expansions: Vec::new(), counts: vec![s.len()] };
    for iter in 1..=iterations {
        let marked = s.mark(&marker);
        if marked.is_empty() {
            return Err(Error::EmptyMarking { iteration: iter });
        }
        s.structured_refine_mut(&marked)?;
        let dir = options.parity.direction(iter);
        let cap = s.mesh().meshlines().len();
        let mut n_expansions = 0;
        loop {
            let outer = {
                let index = SupportIndex::new(&s);
                match index.first_outer() {
                    Some(i) => index.keys[i].clone(),
                    None => break,
                }
            };
            n_expansions += 1;
            if n_expansions > cap {
                return Err(Error::ExpansionCap { iteration: iter, cap });
            }
            let dirs: &[Direction] = match options.expansion {
                Expansion::OneDirectional => std::slice::from_ref(&dir),
                Expansion::Full => &Direction::BOTH,
            };
            let inserted = expand_mut(&mut s, &outer, dirs)?;
            if inserted == 0 {
                return Err(Error::Numerical(format!(
                    "expansion of {outer} in iteration {iter} inserted no meshline"
                )));
            }
            trace.expansions.push(ExpansionRecord {
                iter,
                outer,
                dir: match options.expansion {
                    Expansion::OneDirectional => dir.k(),
                    Expansion::Full => 0,
                },
                n_functions_after: s.len(),
            });
        }
        trace.counts.push(s.len());
        on_iteration(iter, &s);
    }
    Ok((s, trace))
}

/// Structured refinement only (no nestedness removal).
pub fn structured_pipeline<M>(space: &LRSpace, marker: M, iterations: usize) -> Result<(LRSpace, Vec<usize>)>
where
    M: Fn(&FunctionKey) -> bool,
{
    let mut s = space.clone();
    let mut counts = vec![s.len()];
    for iter in 1..=iterations {
        let marked = s.mark(&marker);
        if marked.is_empty() {
            return Err(Error::EmptyMarking { iteration: iter });
        }
        s.structured_refine_mut(&marked)?;
        counts.push(s.len());
    }
    Ok((s, counts))
}

/// Geometric marking predicates.
///
/// Point and diagonal markers look at the central box of a function (its
/// middle knot span per direction), so that each feature selects the
/// functions centred on it rather than every function whose support reaches it.
pub mod markers {
    use crate::bspline::FunctionKey;

    /// The interior of the central box meets the diagonal `y = x`.
    pub fn diagonal(k: &FunctionKey) -> bool {
        let c = k.central_box();
        c.x_min.max(c.y_min) < c.x_max.min(c.y_max)
    }

    /// The interior of the support meets the diagonal `y = x`.
    pub fn diagonal_support(k: &FunctionKey) -> bool {
        let s = k.support();
        s.x_min.max(s.y_min) < s.x_max.min(s.y_max)
    }

    /// The central box, taken half-open `[a, b) x [c, d)`, contains one of the points.
    pub fn central_contains_any(points: &[(f64, f64)]) -> impl Fn(&FunctionKey) -> bool + '_ {
        move |k| {
            let [x0, x1, y0, y1] = k.central_box().to_f64();
            points.iter().any(|&(x, y)| x0 <= x && x < x1 && y0 <= y && y < y1)
        }
    }

    /// The closed support contains one of the points.
    pub fn support_contains_any(points: &[(f64, f64)]) -> impl Fn(&FunctionKey) -> bool + '_ {
        move |k| {
            let s = k.support();
            points.iter().any(|&(x, y)| s.contains_point(x, y))
        }
    }

    /// The support meets the circle: nearest distance to the center is at
    /// most the radius and farthest distance at least the radius.
    pub fn circle(center: (f64, f64), radius: f64) -> impl Fn(&FunctionKey) -> bool {
        move |k| {
            let [x0, x1, y0, y1] = k.support().to_f64();
            let dx = (x0 - center.0).max(0.0).max(center.0 - x1);
            let dy = (y0 - center.1).max(0.0).max(center.1 - y1);
            let dmin = (dx * dx + dy * dy).sqrt();
            let fx = (center.0 - x0).abs().max((center.0 - x1).abs());
            let fy = (center.1 - y0).abs().max((center.1 - y1).abs());
            let dmax = (fx * fx + fy * fy).sqrt();
            dmin <= radius && radius <= dmax
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn d(n: i64) -> Dyadic {
        Dyadic::from_int(n)
    }

    fn key(x: &[i64], y: &[i64]) -> FunctionKey {
        FunctionKey::new(x.iter().map(|&n| d(n)).collect(), y.iter().map(|&n| d(n)).collect()).unwrap()
    }

    #[test]
    fn identical_functions_are_not_nested() {
        let k = key(&[0, 1, 2, 3], &[0, 1, 2, 3]);
        assert!(!is_nested_knotwise(&k, &k));
        let m = mesh_from_knots(&k.x, &k.y).unwrap();
        assert!(!is_nested_meshwise(&k, &k, &m));
    }

    #[test]
    fn tensor_space_has_no_nesting() {
        let s = LRSpace::uniform(Rect::unit_square(), (2, 2), (4, 4)).unwrap();
        assert!(nested_map(&s).is_empty());
    }

    #[test]
    fn parity_alternates() {
        assert_eq!(Parity::OddVertical.direction(1), Direction::Vertical);
        assert_eq!(Parity::OddVertical.direction(2), Direction::Horizontal);
        assert_eq!(Parity::OddHorizontal.direction(1), Direction::Horizontal);
    }

    #[test]
    fn mark_all_is_uniform_refinement() {
        let s = LRSpace::uniform(Rect::unit_square(), (2, 2), (4, 4)).unwrap();
        let (r, trace) = n2s_pipeline(&s, |_: &FunctionKey| true, 1, PipelineOptions::default()).unwrap();
        assert!(trace.expansions.is_empty());
        assert_eq!(r.len(), 100);
    }

    #[test]
    fn circle_marker() {
        let m = markers::circle((0.0, 0.0), 1.0);
        assert!(m(&key(&[0, 1, 1, 2], &[0, 1, 1, 2])));
        assert!(!m(&key(&[5, 5, 5, 6], &[5, 6, 6, 6])));
        let e = Dyadic::new(1, 3).unwrap();
        let small = FunctionKey::new(vec![d(0), d(0), d(0), e], vec![d(0), d(0), d(0), e]).unwrap();
        assert!(!m(&small));
    }
}
