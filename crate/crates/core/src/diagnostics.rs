//! Checklist of the equivalent independence conditions for one space.

use serde::Serialize;

use crate::bspline::FunctionKey;
use crate::n2s::{is_nested_knotwise, is_nested_meshwise};
use crate::space::LRSpace;

#[derive(Clone, Debug, Serialize)]
pub struct ElementCount {
    pub rect: [f64; 4],
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NestedPair {
    pub outer: FunctionKey,
    pub inner: FunctionKey,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub n_functions: usize,
    pub n_elements: usize,
    pub bidegree: (u32, u32),
    pub expected_per_element: usize,
    pub overloaded_elements: usize,
    pub underloaded_elements: usize,
    pub nested_knotwise: Vec<NestedPair>,
    pub nested_meshwise: Vec<NestedPair>,
    pub pou_defect_unweighted: f64,
    pub pou_defect_weighted: f64,
    /// `None` when the space is above the dense-rank size limit.
    pub collocation_rank: Option<usize>,
    pub element_counts: Vec<ElementCount>,
}

impl Report {
    pub fn locally_linearly_independent(&self) -> bool {
        self.overloaded_elements == 0 && self.underloaded_elements == 0
    }

    pub fn non_nested(&self) -> bool {
        self.nested_knotwise.is_empty() && self.nested_meshwise.is_empty()
    }

    pub fn rank_deficiency(&self) -> Option<usize> {
        self.collocation_rank.map(|r| self.n_functions - r)
    }

    pub fn all_green(&self) -> bool {
        self.locally_linearly_independent()
            && self.non_nested()
            && self.pou_defect_unweighted <= 1e-12
            && self.rank_deficiency().unwrap_or(0) == 0
    }

    /// Short human-readable summary, one check per line.
    pub fn summary(&self) -> String {
        let mark = |ok: bool| if ok { "ok  " } else { "FAIL" };
        let rank = match self.collocation_rank {
            Some(r) => format!("{r} of {} (deficiency {})", self.n_functions, self.n_functions - r),
            None => "skipped (space too large)".into(),
        };
        [
            format!("functions {}  elements {}  bidegree {:?}", self.n_functions, self.n_elements, self.bidegree),
            format!(
                "{} element counts: {} overloaded, {} underloaded (expected {})",
                mark(self.locally_linearly_independent()),
                self.overloaded_elements,
                self.underloaded_elements,
                self.expected_per_element
            ),
            format!(
                "{} nested pairs: {} knotwise, {} meshwise",
                mark(self.non_nested()),
                self.nested_knotwise.len(),
                self.nested_meshwise.len()
            ),
            format!(
                "{} partition of unity: unweighted defect {:.3e}, weighted defect {:.3e}",
                mark(self.pou_defect_unweighted <= 1e-12),
                self.pou_defect_unweighted,
                self.pou_defect_weighted
            ),
            format!("{} collocation rank {}", mark(self.rank_deficiency().unwrap_or(0) == 0), rank),
        ]
        .join("\n")
    }
}

/// All pairs `(outer, inner)` with `inner` nested in `outer`, under both
/// definitions.
pub fn nested_pairs(space: &LRSpace) -> (Vec<NestedPair>, Vec<NestedPair>) {
    let keys: Vec<&FunctionKey> = space.keys().collect();
    let supports: Vec<_> = keys.iter().map(|k| k.support()).collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| supports[i].x_min);
    let (mut knot, mut mesh) = (Vec::new(), Vec::new());
    for (oi, outer) in keys.iter().enumerate() {
        let so = supports[oi];
        let start = order.partition_point(|&i| supports[i].x_min < so.x_min);
        for &ii in &order[start..] {
            if supports[ii].x_min > so.x_max {
                break;
            }
            if ii == oi || !so.contains_rect(&supports[ii]) {
                continue;
            }
            let pair = || NestedPair { outer: (*outer).clone(), inner: keys[ii].clone() };
            if is_nested_knotwise(keys[ii], outer) {
                knot.push(pair());
            }
            if is_nested_meshwise(keys[ii], outer, space.mesh()) {
                mesh.push(pair());
            }
        }
    }
    (knot, mesh)
}

/// Spaces with more functions skip the dense collocation rank.
pub const RANK_LIMIT: usize = 2500;

pub fn report(space: &LRSpace, seed: u64) -> Report {
    let (p1, p2) = space.bidegree();
    let full = ((p1 + 1) * (p2 + 1)) as usize;
    let counts = space.support_counts();
    let (nested_knotwise, nested_meshwise) = nested_pairs(space);
    let pts = space.collocation_points(seed);
    let collocation_rank = (space.len() <= RANK_LIMIT).then(|| space.collocation_rank(&pts));
    Report {
        n_functions: space.len(),
        n_elements: counts.len(),
        bidegree: (p1, p2),
        expected_per_element: full,
        overloaded_elements: counts.iter().filter(|c| c.1 > full).count(),
        underloaded_elements: counts.iter().filter(|c| c.1 < full).count(),
        nested_knotwise,
        nested_meshwise,
        pou_defect_unweighted: space.partition_of_unity_defect(&pts, false),
        pou_defect_weighted: space.partition_of_unity_defect(&pts, true),
        collocation_rank,
        element_counts: counts
            .into_iter()
            .map(|(e, count)| ElementCount { rect: e.rect.to_f64(), count })
            .collect(),
    }
}
