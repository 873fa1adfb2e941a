//! Box-partitions and their meshes.
//!
//! A [`Mesh`] stores, for each direction and each fixed coordinate, the
//! canonical list of collinear runs of meshlines together with their
//! multiplicities. Touching runs on the same line always carry different
//! multiplicities, which the constant-split rule forbids, so a canonical
//! line is a sorted list of pairwise disjoint segments. The elements of the
//! box-partition are kept alongside the lines and updated on split insertion.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Orientation of a meshline. `Vertical` lines sit at a fixed x (the usual
/// direction 1) and carry x-knots; `Horizontal` lines sit at a fixed y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Vertical,
    Horizontal,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Vertical, Direction::Horizontal];

    /// 1 for vertical, 2 for horizontal.
    pub fn k(self) -> u8 {
        match self {
            Direction::Vertical => 1,
            Direction::Horizontal => 2,
        }
    }

    pub fn from_k(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Direction::Vertical),
            2 => Ok(Direction::Horizontal),
            _ => Err(Error::Precondition(format!("direction must be 1 or 2, got {k}"))),
        }
    }

    pub fn index(self) -> usize {
        (self.k() - 1) as usize
    }

    pub fn other(self) -> Direction {
        match self {
            Direction::Vertical => Direction::Horizontal,
            Direction::Horizontal => Direction::Vertical,
        }
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.k().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Direction::from_k(u8::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Closed axis-aligned rectangle with non-empty interior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x_min: Dyadic,
    pub x_max: Dyadic,
    pub y_min: Dyadic,
    pub y_max: Dyadic,
}

impl Rect {
    pub fn new(x_min: Dyadic, x_max: Dyadic, y_min: Dyadic, y_max: Dyadic) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidRect(format!(
                "[{x_min:?}, {x_max:?}] x [{y_min:?}, {y_max:?}]"
            )));
        }
        Ok(Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn unit_square() -> Rect {
        Rect {
            x_min: Dyadic::ZERO,
            x_max: Dyadic::ONE,
            y_min: Dyadic::ZERO,
            y_max: Dyadic::ONE,
        }
    }

    /// Range of positions of lines with the given orientation (x for vertical lines).
    pub fn fixed_range(&self, dir: Direction) -> (Dyadic, Dyadic) {
        match dir {
            Direction::Vertical => (self.x_min, self.x_max),
            Direction::Horizontal => (self.y_min, self.y_max),
        }
    }

    /// Range covered along a line with the given orientation (y for vertical lines).
    pub fn span_range(&self, dir: Direction) -> (Dyadic, Dyadic) {
        self.fixed_range(dir.other())
    }

    pub fn area(&self) -> Dyadic {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x_min <= other.x_min
            && other.x_max <= self.x_max
            && self.y_min <= other.y_min
            && other.y_max <= self.y_max
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.x_min.to_f64() <= x
            && x <= self.x_max.to_f64()
            && self.y_min.to_f64() <= y
            && y <= self.y_max.to_f64()
    }

    /// Interiors intersect.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min.to_f64() + self.x_max.to_f64()),
            0.5 * (self.y_min.to_f64() + self.y_max.to_f64()),
        )
    }

    pub fn to_f64(&self) -> [f64; 4] {
        [
            self.x_min.to_f64(),
            self.x_max.to_f64(),
            self.y_min.to_f64(),
            self.y_max.to_f64(),
        ]
    }
}

/// One cell of the box-partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Element {
    pub rect: Rect,
}

/// A canonical run of collinear meshlines with uniform multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meshline {
    #[serde(rename = "dir")]
    pub direction: Direction,
    pub fixed: Dyadic,
    pub span: (Dyadic, Dyadic),
    #[serde(rename = "mult")]
    pub multiplicity: u32,
}

/// A segment to insert into a mesh, raising multiplicity by `multiplicity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Split {
    pub direction: Direction,
    pub fixed: Dyadic,
    pub span: (Dyadic, Dyadic),
    pub multiplicity: u32,
}

impl Split {
    pub fn new(direction: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic, multiplicity: u32) -> Self {
        Split {
            direction,
            fixed,
            span: (lo, hi),
            multiplicity,
        }
    }

    /// Vertical split `{x} x [y0, y1]`.
    pub fn vertical(x: Dyadic, y0: Dyadic, y1: Dyadic) -> Self {
        Split::new(Direction::Vertical, x, y0, y1, 1)
    }

    /// Horizontal split `[x0, x1] x {y}`.
    pub fn horizontal(y: Dyadic, x0: Dyadic, x1: Dyadic) -> Self {
        Split::new(Direction::Horizontal, y, x0, x1, 1)
    }

    pub fn with_multiplicity(mut self, m: u32) -> Self {
        self.multiplicity = m;
        self
    }
}

impl From<Meshline> for Split {
    fn from(l: Meshline) -> Self {
        Split {
            direction: l.direction,
            fixed: l.fixed,
            span: l.span,
            multiplicity: l.multiplicity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Segment {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub mult: u32,
}

type Lines = BTreeMap<Dyadic, Vec<Segment>>;

/// How a split relates to the meshlines already present on its line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    /// Made solely of new meshlines.
    New,
    /// Made solely of existing meshlines.
    Existing,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    domain: Rect,
    bidegree: (u32, u32),
    lines: [Lines; 2],
    elements: Vec<Rect>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.bidegree == other.bidegree && self.lines == other.lines
    }
}

impl Eq for Mesh {}

impl fmt::Display for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mesh on {:?}, bidegree {:?}, {} meshlines, {} elements",
            self.domain.to_f64(),
            self.bidegree,
            self.meshlines().len(),
            self.elements.len()
        )
    }
}

impl Mesh {
    /// Uniform open tensor mesh with `n_cells` cells per direction,
    /// interior multiplicity 1 and full boundary multiplicity.
    pub fn open_tensor(domain: Rect, bidegree: (u32, u32), n_cells: (u32, u32)) -> Result<Mesh> {
        check_bidegree(bidegree)?;
        if n_cells.0 == 0 || n_cells.1 == 0 {
            return Err(Error::InvalidMesh("n_cells must be at least 1 per direction".into()));
        }
        let xs = uniform_breaks(domain.x_min, domain.x_max, n_cells.0)?;
        let ys = uniform_breaks(domain.y_min, domain.y_max, n_cells.1)?;
        let with_mult = |v: Vec<Dyadic>, p: u32| -> Vec<(Dyadic, u32)> {
            let n = v.len();
            v.into_iter()
                .enumerate()
                .map(|(i, a)| (a, if i == 0 || i + 1 == n { p + 1 } else { 1 }))
                .collect()
        };
        Mesh::tensor(bidegree, &with_mult(xs, bidegree.0), &with_mult(ys, bidegree.1))
    }

    /// Tensor mesh from distinct breakpoints with multiplicities, first and
    /// last entries being the domain boundary.
    pub fn tensor(bidegree: (u32, u32), xs: &[(Dyadic, u32)], ys: &[(Dyadic, u32)]) -> Result<Mesh> {
        check_bidegree(bidegree)?;
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::InvalidMesh("tensor mesh needs two breakpoints per direction".into()));
        }
        for w in xs.windows(2).chain(ys.windows(2)) {
            if w[0].0 >= w[1].0 {
                return Err(Error::InvalidMesh("tensor breakpoints must increase".into()));
            }
        }
        let domain = Rect::new(xs[0].0, xs[xs.len() - 1].0, ys[0].0, ys[ys.len() - 1].0)?;
        let mut lines: [Lines; 2] = [BTreeMap::new(), BTreeMap::new()];
        for &(x, m) in xs {
            check_mult(m, bidegree.0)?;
            lines[0].insert(x, vec![Segment { lo: domain.y_min, hi: domain.y_max, mult: m }]);
        }
        for &(y, m) in ys {
            check_mult(m, bidegree.1)?;
            lines[1].insert(y, vec![Segment { lo: domain.x_min, hi: domain.x_max, mult: m }]);
        }
        let mut elements = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
        for wx in xs.windows(2) {
            for wy in ys.windows(2) {
                elements.push(Rect { x_min: wx[0].0, x_max: wx[1].0, y_min: wy[0].0, y_max: wy[1].0 });
            }
        }
        Ok(Mesh { domain, bidegree, lines, elements })
    }

    /// Builds a mesh from an arbitrary collection of meshlines, reconstructing
    /// the box-partition and validating it.
    pub fn from_lines(domain: Rect, bidegree: (u32, u32), meshlines: &[Meshline]) -> Result<Mesh> {
        check_bidegree(bidegree)?;
        let mut lines: [Lines; 2] = [BTreeMap::new(), BTreeMap::new()];
        for l in meshlines {
            let p = deg(bidegree, l.direction);
            check_mult(l.multiplicity, p)?;
            let (flo, fhi) = domain.fixed_range(l.direction);
            let (slo, shi) = domain.span_range(l.direction);
            if l.span.0 >= l.span.1 {
                return Err(Error::InvalidMesh(format!("degenerate meshline {l:?}")));
            }
            if l.fixed < flo || l.fixed > fhi || l.span.0 < slo || l.span.1 > shi {
                return Err(Error::InvalidMesh(format!("meshline {l:?} leaves the domain")));
            }
            let segs = lines[l.direction.index()].entry(l.fixed).or_default();
            let seg = Segment { lo: l.span.0, hi: l.span.1, mult: l.multiplicity };
            if segs.iter().any(|s| s.lo < seg.hi && seg.lo < s.hi) {
                return Err(Error::InvalidMesh(format!("overlapping meshlines at {l:?}")));
            }
            segs.push(seg);
        }
        for segs in lines.iter_mut().flat_map(|l| l.values_mut()) {
            segs.sort_by_key(|a| a.lo);
            *segs = merge_touching(segs)?;
        }
        // The boundary must be fully drawn.
        for dir in Direction::BOTH {
            let (flo, fhi) = domain.fixed_range(dir);
            let (slo, shi) = domain.span_range(dir);
            for a in [flo, fhi] {
                let covered = lines[dir.index()]
                    .get(&a)
                    .map(|s| s.len() == 1 && s[0].lo == slo && s[0].hi == shi)
                    .unwrap_or(false);
                if !covered {
                    return Err(Error::InvalidMesh(format!(
                        "boundary line {dir:?} at {a:?} is not fully covered by one constant split"
                    )));
                }
            }
        }
        let elements = reconstruct_elements(&domain, &lines)?;
        Ok(Mesh { domain, bidegree, lines, elements })
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn bidegree(&self) -> (u32, u32) {
        self.bidegree
    }

    pub fn degree(&self, dir: Direction) -> u32 {
        deg(self.bidegree, dir)
    }

    /// All canonical runs, vertical ones first, each group ordered by position.
    pub fn meshlines(&self) -> Vec<Meshline> {
        let mut out = Vec::new();
        for dir in Direction::BOTH {
            for (&fixed, segs) in &self.lines[dir.index()] {
                for s in segs {
                    out.push(Meshline { direction: dir, fixed, span: (s.lo, s.hi), multiplicity: s.mult });
                }
            }
        }
        out
    }

    /// Elements ordered lexicographically by lower-left corner (x, then y).
    pub fn elements(&self) -> Vec<Element> {
        let mut e: Vec<Rect> = self.elements.clone();
        e.sort_by_key(|a| (a.x_min, a.y_min));
        e.into_iter().map(|rect| Element { rect }).collect()
    }

    pub fn element_rects(&self) -> &[Rect] {
        &self.elements
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub(crate) fn segments(&self, dir: Direction, fixed: Dyadic) -> &[Segment] {
        self.lines[dir.index()].get(&fixed).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Positions of lines of direction `dir` strictly inside `(lo, hi)`.
    pub(crate) fn positions_between(
        &self,
        dir: Direction,
        lo: Dyadic,
        hi: Dyadic,
    ) -> impl Iterator<Item = (&Dyadic, &Vec<Segment>)> + '_ {
        use std::ops::Bound::Excluded;
        self.lines[dir.index()].range((Excluded(lo), Excluded(hi)))
    }

    pub fn positions(&self, dir: Direction) -> impl Iterator<Item = Dyadic> + '_ {
        self.lines[dir.index()].keys().copied()
    }

    /// Minimum multiplicity along `{fixed} x [lo, hi]` (for vertical lines),
    /// or 0 when that segment is not entirely covered by meshlines.
    pub fn multiplicity_over(&self, dir: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic) -> u32 {
        coverage(self.segments(dir, fixed), lo, hi)
    }

    /// Whether the point at `along` on the line `fixed` of direction `dir` lies
    /// on some meshline of that line (endpoints included).
    pub fn point_on_line(&self, dir: Direction, fixed: Dyadic, along: Dyadic) -> bool {
        self.segments(dir, fixed).iter().any(|s| s.lo <= along && along <= s.hi)
    }

    pub fn is_open(&self) -> bool {
        Direction::BOTH.iter().all(|&dir| {
            let (lo, hi) = self.domain.fixed_range(dir);
            let (slo, shi) = self.domain.span_range(dir);
            let full = self.degree(dir) + 1;
            [lo, hi].iter().all(|&a| self.multiplicity_over(dir, a, slo, shi) == full)
        })
    }

    /// No interior T-vertex whose stem has orientation `dir`: every interior
    /// line of that orientation crosses the whole domain.
    pub fn is_tensorized(&self, dir: Direction) -> bool {
        let (lo, hi) = self.domain.fixed_range(dir);
        let (slo, shi) = self.domain.span_range(dir);
        self.positions_between(dir, lo, hi)
            .all(|(_, segs)| segs.len() == 1 && segs[0].lo == slo && segs[0].hi == shi)
    }

    pub fn is_tensor(&self) -> bool {
        self.is_tensorized(Direction::Vertical) && self.is_tensorized(Direction::Horizontal)
    }

    /// Classifies a split against the current mesh without modifying it.
    pub fn classify_split(&self, split: &Split) -> Result<SplitKind> {
        let (a, b) = split.span;
        if a >= b {
            return Err(Error::InvalidSplit(format!("empty span {:?}", split.span)));
        }
        if split.multiplicity == 0 {
            return Err(Error::InvalidSplit("multiplicity must be positive".into()));
        }
        let (flo, fhi) = self.domain.fixed_range(split.direction);
        let (slo, shi) = self.domain.span_range(split.direction);
        if split.fixed < flo || split.fixed > fhi || a < slo || b > shi {
            return Err(Error::InvalidSplit(format!("{split:?} leaves the domain")));
        }
        let segs = self.segments(split.direction, split.fixed);
        let covered = covered_length_parts(segs, a, b);
        if covered == CoverState::Full {
            Ok(SplitKind::Existing)
        } else if covered == CoverState::None {
            Ok(SplitKind::New)
        } else {
            Err(Error::InvalidSplit(format!(
                "{split:?} mixes new and existing meshlines"
            )))
        }
    }

    /// `M + gamma`: returns the refined mesh.
    pub fn insert_split(&self, split: &Split) -> Result<Mesh> {
        let mut m = self.clone();
        m.insert_split_mut(split)?;
        Ok(m)
    }

    /// In-place split insertion. Returns the number of traversed elements.
    /// On error the mesh is left unchanged.
    pub fn insert_split_mut(&mut self, split: &Split) -> Result<usize> {
        let kind = self.classify_split(split)?;
        let dir = split.direction;
        let p = self.degree(dir);
        let (a, b) = split.span;
        let mut segs: Vec<Segment> = self.segments(dir, split.fixed).to_vec();
        let mut traversed = Vec::new();
        match kind {
            SplitKind::Existing => {
                // Raise every covered piece; pieces outside [a, b] keep their multiplicity.
                let mut out = Vec::with_capacity(segs.len() + 2);
                for s in segs {
                    if s.hi <= a || s.lo >= b {
                        out.push(s);
                        continue;
                    }
                    if s.lo < a {
                        out.push(Segment { lo: s.lo, hi: a, mult: s.mult });
                    }
                    let m = s.mult + split.multiplicity;
                    if m > p + 1 {
                        return Err(Error::InvalidSplit(format!(
                            "multiplicity {m} exceeds {} on {split:?}",
                            p + 1
                        )));
                    }
                    out.push(Segment { lo: s.lo.max(a), hi: s.hi.min(b), mult: m });
                    if s.hi > b {
                        out.push(Segment { lo: b, hi: s.hi, mult: s.mult });
                    }
                }
                segs = merge_touching(&out)
                    .map_err(|_| Error::InvalidSplit(format!("{split:?} breaks constant splits")))?;
            }
            SplitKind::New => {
                if split.multiplicity > p + 1 {
                    return Err(Error::InvalidSplit(format!(
                        "multiplicity {} exceeds {}",
                        split.multiplicity,
                        p + 1
                    )));
                }
                let other = dir.other();
                for end in [a, b] {
                    if !self.point_on_line(other, end, split.fixed) {
                        return Err(Error::InvalidSplit(format!(
                            "{split:?} is not anchored at a vertex at {end:?}"
                        )));
                    }
                }
                for (i, e) in self.elements.iter().enumerate() {
                    let (elo, ehi) = e.fixed_range(dir);
                    let (sl, sh) = e.span_range(dir);
                    if elo < split.fixed && split.fixed < ehi && sl < b && a < sh {
                        if sl < a || sh > b {
                            return Err(Error::InvalidSplit(format!(
                                "{split:?} ends inside an element"
                            )));
                        }
                        traversed.push(i);
                    }
                }
                if traversed.is_empty() {
                    return Err(Error::InvalidSplit(format!("{split:?} traverses no element")));
                }
                segs.push(Segment { lo: a, hi: b, mult: split.multiplicity });
                segs.sort_by_key(|x| x.lo);
                segs = merge_touching(&segs)
                    .map_err(|_| Error::InvalidSplit(format!("{split:?} breaks constant splits")))?;
            }
        }
        self.lines[dir.index()].insert(split.fixed, segs);
        for &i in traversed.iter().rev() {
            let e = self.elements.swap_remove(i);
            let (lo, hi) = match dir {
                Direction::Vertical => (
                    Rect { x_max: split.fixed, ..e },
                    Rect { x_min: split.fixed, ..e },
                ),
                Direction::Horizontal => (
                    Rect { y_max: split.fixed, ..e },
                    Rect { y_min: split.fixed, ..e },
                ),
            };
            self.elements.push(lo);
            self.elements.push(hi);
        }
        Ok(traversed.len())
    }

    /// Covers `{fixed} x [lo, hi]` with meshlines of multiplicity at least 1,
    /// inserting only the uncovered gaps as new multiplicity-1 splits.
    /// Returns the number of gaps inserted.
    pub fn extend_line_mut(&mut self, dir: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic) -> Result<usize> {
        let gaps = uncovered_gaps(self.segments(dir, fixed), lo, hi);
        let mut pending: Vec<(Dyadic, Dyadic)> = gaps;
        let mut inserted = 0;
        // Each gap is bounded by line ends or by the requested endpoints; a gap
        // whose end is not yet a vertex is split at crossing lines and retried.
        while !pending.is_empty() {
            let mut progress = false;
            let mut next = Vec::new();
            for (a, b) in pending {
                let split = Split::new(dir, fixed, a, b, 1);
                match self.insert_split_mut(&split) {
                    Ok(_) => {
                        inserted += 1;
                        progress = true;
                    }
                    Err(_) => {
                        let cuts: Vec<Dyadic> = self
                            .positions_between(dir.other(), a, b)
                            .filter(|(_, segs)| segs.iter().any(|s| s.lo <= fixed && fixed <= s.hi))
                            .map(|(&c, _)| c)
                            .collect();
                        if cuts.is_empty() {
                            return Err(Error::InvalidSplit(format!(
                                "cannot extend {dir:?} line at {fixed:?} over [{a:?}, {b:?}]"
                            )));
                        }
                        let mut prev = a;
                        for c in cuts.into_iter().chain(std::iter::once(b)) {
                            next.push((prev, c));
                            prev = c;
                        }
                    }
                }
            }
            if !progress && !next.is_empty() {
                // Try the finest pieces once more; if nothing goes in, give up.
                let mut any = false;
                let mut rest = Vec::new();
                for (a, b) in next {
                    match self.insert_split_mut(&Split::new(dir, fixed, a, b, 1)) {
                        Ok(_) => {
                            inserted += 1;
                            any = true;
                        }
                        Err(_) => rest.push((a, b)),
                    }
                }
                if !any && !rest.is_empty() {
                    return Err(Error::InvalidSplit(format!(
                        "cannot extend {dir:?} line at {fixed:?}"
                    )));
                }
                pending = rest;
            } else {
                pending = next;
            }
        }
        Ok(inserted)
    }
}

/// Tensor mesh on the support of `B[x, y]` whose meshline multiplicities are
/// the knot multiplicities.
pub fn mesh_from_knots(x: &[Dyadic], y: &[Dyadic]) -> Result<Mesh> {
    if x.len() < 3 || y.len() < 3 {
        return Err(Error::InvalidKnots("knot vectors need at least 3 entries".into()));
    }
    let bidegree = ((x.len() - 2) as u32, (y.len() - 2) as u32);
    let xs = distinct_with_mult(x)?;
    let ys = distinct_with_mult(y)?;
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidKnots("degenerate support".into()));
    }
    Mesh::tensor(bidegree, &xs, &ys)
}

/// Distinct values of a nondecreasing knot vector with their multiplicities.
pub fn distinct_with_mult(knots: &[Dyadic]) -> Result<Vec<(Dyadic, u32)>> {
    let mut out: Vec<(Dyadic, u32)> = Vec::new();
    for &k in knots {
        match out.last_mut() {
            Some((v, m)) if *v == k => *m += 1,
            Some((v, _)) if *v > k => {
                return Err(Error::InvalidKnots(format!("{knots:?} is not nondecreasing")))
            }
            _ => out.push((k, 1)),
        }
    }
    Ok(out)
}

fn deg(bidegree: (u32, u32), dir: Direction) -> u32 {
    match dir {
        Direction::Vertical => bidegree.0,
        Direction::Horizontal => bidegree.1,
    }
}

fn check_bidegree(b: (u32, u32)) -> Result<()> {
    if b.0 == 0 || b.1 == 0 {
        return Err(Error::InvalidMesh(format!("bidegree {b:?} must be positive")));
    }
    Ok(())
}

fn check_mult(m: u32, p: u32) -> Result<()> {
    if m == 0 || m > p + 1 {
        return Err(Error::InvalidMesh(format!("multiplicity {m} outside 1..={}", p + 1)));
    }
    Ok(())
}

fn uniform_breaks(lo: Dyadic, hi: Dyadic, n: u32) -> Result<Vec<Dyadic>> {
    if lo >= hi {
        return Err(Error::InvalidRect(format!("[{lo:?}, {hi:?}]")));
    }
    let h = (hi - lo)
        .div_int(n as i64)
        .ok_or_else(|| Error::NonDyadic(format!("width {} / {n}", (hi - lo).to_f64())))?;
    Ok((0..=n).map(|i| lo + h.mul_int(i as i64)).collect())
}

/// Merges touching segments of equal multiplicity; touching segments with
/// different multiplicity are an error (non-constant split).
fn merge_touching(segs: &[Segment]) -> Result<Vec<Segment>> {
    let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
    for &s in segs {
        match out.last_mut() {
            Some(last) if last.hi == s.lo => {
                if last.mult != s.mult {
                    return Err(Error::InvalidMesh("non-constant split".into()));
                }
                last.hi = s.hi;
            }
            _ => out.push(s),
        }
    }
    Ok(out)
}

pub(crate) fn coverage(segs: &[Segment], lo: Dyadic, hi: Dyadic) -> u32 {
    // Segments are sorted and disjoint; find the one containing `lo`.
    let start = segs.partition_point(|s| s.hi <= lo);
    let mut at = lo;
    let mut min = u32::MAX;
    for s in &segs[start..] {
        if s.lo > at {
            return 0;
        }
        min = min.min(s.mult);
        if s.hi >= hi {
            return min;
        }
        at = s.hi;
    }
    0
}

#[derive(PartialEq, Eq)]
enum CoverState {
    None,
    Partial,
    Full,
}

fn covered_length_parts(segs: &[Segment], a: Dyadic, b: Dyadic) -> CoverState {
    let overlapping: Vec<&Segment> = segs.iter().filter(|s| s.lo < b && a < s.hi).collect();
    if overlapping.is_empty() {
        return CoverState::None;
    }
    if coverage(segs, a, b) > 0 {
        CoverState::Full
    } else {
        CoverState::Partial
    }
}

fn uncovered_gaps(segs: &[Segment], lo: Dyadic, hi: Dyadic) -> Vec<(Dyadic, Dyadic)> {
    let mut gaps = Vec::new();
    let mut at = lo;
    for s in segs {
        if s.hi <= at {
            continue;
        }
        if s.lo >= hi {
            break;
        }
        if s.lo > at {
            gaps.push((at, s.lo));
        }
        at = s.hi;
        if at >= hi {
            break;
        }
    }
    if at < hi {
        gaps.push((at, hi));
    }
    gaps
}

/// Recovers the box-partition from the lines: cells of the grid of all line
/// positions are merged across grid edges not covered by a meshline.
fn reconstruct_elements(domain: &Rect, lines: &[Lines; 2]) -> Result<Vec<Rect>> {
    let xs: Vec<Dyadic> = lines[0].keys().copied().collect();
    let ys: Vec<Dyadic> = lines[1].keys().copied().collect();
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let idx = |i: usize, j: usize| i * ny + j;
    let mut parent: Vec<usize> = (0..nx * ny).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let on_line = |dir: Direction, fixed: Dyadic, lo: Dyadic, hi: Dyadic| {
        lines[dir.index()]
            .get(&fixed)
            .map(|s| coverage(s, lo, hi) > 0)
            .unwrap_or(false)
    };
    // Interior grid edges: vertical edge between cells (i-1, j) and (i, j).
    let mut walls = Vec::new();
    for i in 1..nx {
        for j in 0..ny {
            if on_line(Direction::Vertical, xs[i], ys[j], ys[j + 1]) {
                walls.push((idx(i - 1, j), idx(i, j)));
            } else {
                let (a, b) = (find(&mut parent, idx(i - 1, j)), find(&mut parent, idx(i, j)));
                parent[a] = b;
            }
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            if on_line(Direction::Horizontal, ys[j], xs[i], xs[i + 1]) {
                walls.push((idx(i, j - 1), idx(i, j)));
            } else {
                let (a, b) = (find(&mut parent, idx(i, j - 1)), find(&mut parent, idx(i, j)));
                parent[a] = b;
            }
        }
    }
    // Every meshline piece must separate two different elements.
    for (a, b) in walls {
        if find(&mut parent, a) == find(&mut parent, b) {
            return Err(Error::InvalidMesh("a meshline ends inside an element".into()));
        }
    }
    // Meshline endpoints must coincide with grid positions.
    for dir in Direction::BOTH {
        let grid = if dir == Direction::Vertical { &ys } else { &xs };
        for segs in lines[dir.index()].values() {
            for s in segs {
                if grid.binary_search(&s.lo).is_err() || grid.binary_search(&s.hi).is_err() {
                    return Err(Error::InvalidMesh("a meshline ends away from every vertex".into()));
                }
            }
        }
    }
    let mut boxes: BTreeMap<usize, (usize, usize, usize, usize, usize)> = BTreeMap::new();
    for i in 0..nx {
        for j in 0..ny {
            let r = find(&mut parent, idx(i, j));
            let e = boxes.entry(r).or_insert((i, i, j, j, 0));
            e.0 = e.0.min(i);
            e.1 = e.1.max(i);
            e.2 = e.2.min(j);
            e.3 = e.3.max(j);
            e.4 += 1;
        }
    }
    let mut out = Vec::with_capacity(boxes.len());
    for (i0, i1, j0, j1, count) in boxes.into_values() {
        if (i1 - i0 + 1) * (j1 - j0 + 1) != count {
            return Err(Error::InvalidMesh("a face of the line arrangement is not a rectangle".into()));
        }
        out.push(Rect { x_min: xs[i0], x_max: xs[i1 + 1], y_min: ys[j0], y_max: ys[j1 + 1] });
    }
    debug_assert!(out.iter().all(|r| domain.contains_rect(r)));
    Ok(out)
}
