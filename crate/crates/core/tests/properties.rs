mod common;

use common::*;
use lrspline::bspline::has_minimal_support;
use lrspline::diagnostics::nested_pairs;
use lrspline::io::{space_from_json, space_to_json};
use lrspline::n2s::{is_nested_knotwise, is_nested_meshwise, nested_map};
use lrspline::space::random_points;
use lrspline::{Direction, Dyadic, TensorBSpline};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn knot_insertion_identity(seed in any::<u64>(), p1 in 1usize..=4, p2 in 1usize..=4, vertical in any::<bool>()) {
        let mut r = rng(seed);
        let (x, zx) = random_knots_and_insertion(&mut r, p1);
        let (y, zy) = random_knots_and_insertion(&mut r, p2);
        let (dir, z) = if vertical { (Direction::Vertical, zx) } else { (Direction::Horizontal, zy) };
        let b = TensorBSpline::new(x, y).unwrap();
        let ((a1, b1), (a2, b2)) = b.insert_knot(dir, z).unwrap();
        let zero = num_rational::BigRational::from_integer(0.into());
        let one = num_rational::BigRational::from_integer(1.into());
        prop_assert!(a1 > zero && a1 <= one && a2 > zero && a2 <= one);
        let s = b.support();
        let (s1, s2) = (b1.support(), b2.support());
        prop_assert!(s.contains_rect(&s1) && s.contains_rect(&s2));
        let hull = lrspline::Rect::new(
            s1.x_min.min(s2.x_min), s1.x_max.max(s2.x_max), s1.y_min.min(s2.y_min), s1.y_max.max(s2.y_max),
        ).unwrap();
        prop_assert_eq!(hull, s);
        for (px, py) in random_points(&s, 200, seed) {
            let defect = b.evaluate(px, py) - b1.evaluate(px, py) - b2.evaluate(px, py);
            prop_assert!(defect.abs() <= 1e-12, "defect {defect}");
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn split_order_does_not_matter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (space, splits) = random_split_set(&mut r);
        let mut a = space.clone();
        for s in &splits {
            a = a.apply_split(s).unwrap();
        }
        let mut b = space.clone();
        for s in splits.iter().rev() {
            b = b.apply_split(s).unwrap();
        }
        prop_assert_eq!(a.mesh(), b.mesh());
        prop_assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn split_insertion_adds_traversed_elements(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (space, splits) = random_split_set(&mut r);
        let mut m = space.mesh().clone();
        for s in &splits {
            let along = |rect: &lrspline::Rect| {
                let (flo, fhi) = rect.fixed_range(s.direction);
                let (slo, shi) = rect.span_range(s.direction);
                flo < s.fixed && s.fixed < fhi && s.span.0 <= slo && shi <= s.span.1
            };
            let traversed = m.element_rects().iter().filter(|e| along(e)).count();
            let next = m.insert_split(s).unwrap();
            prop_assert_eq!(next.num_elements(), m.num_elements() + traversed);
            m = next;
        }
        let area = m.elements().iter().fold(d(0), |acc, e| acc + e.rect.area());
        prop_assert_eq!(area, m.domain().area());
        prop_assert_eq!(m.num_elements(), sweep_element_count(&m));
        for dir in Direction::BOTH {
            prop_assert_eq!(m.is_tensorized(dir), no_t_vertices(&m, dir));
        }
    }

    #[test]
    fn refined_spaces_keep_minimal_support_and_unity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (mut space, splits) = random_split_set(&mut r);
        let (p1, p2) = space.bidegree();
        let full = ((p1 + 1) * (p2 + 1)) as usize;
        let pts = random_points(&space.mesh().domain(), 100, seed);
        for s in &splits {
            let before = space.len();
            space = space.apply_split(s).unwrap();
            prop_assert!(space.len() > before);
            prop_assert!(space.partition_of_unity_defect(&pts, true) <= 1e-12);
            for k in space.keys() {
                prop_assert!(has_minimal_support(k, space.mesh()));
            }
            prop_assert!(space.support_counts().iter().all(|(_, c)| *c >= full));
        }
    }

    #[test]
    fn nestedness_definitions_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_structured_space(&mut r);
        let keys: Vec<_> = space.keys().collect();
        for a in &keys {
            for b in &keys {
                prop_assert_eq!(is_nested_knotwise(a, b), is_nested_meshwise(a, b, space.mesh()), "{} in {}", a, b);
            }
        }
        let (kw, mw) = nested_pairs(&space);
        prop_assert_eq!(kw.len(), mw.len());
    }

    #[test]
    fn vertically_tensorized_meshes_are_not_nested(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_vertically_tensorized(&mut r);
        prop_assert!(space.mesh().is_tensorized(Direction::Vertical));
        prop_assert!(no_t_vertices(space.mesh(), Direction::Vertical));
        prop_assert!(nested_map(&space).is_empty());
        prop_assert!(space.is_locally_linearly_independent());
    }

    #[test]
    fn n2s_spaces_satisfy_all_independence_conditions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_n2s_space(&mut r);
        let (p1, p2) = space.bidegree();
        let full = ((p1 + 1) * (p2 + 1)) as usize;
        prop_assert!(nested_map(&space).is_empty());
        prop_assert!(space.support_counts().iter().all(|(_, c)| *c == full));
        let pts = random_points(&space.mesh().domain(), 200, seed);
        prop_assert!(space.partition_of_unity_defect(&pts, false) <= 1e-12);
    }

    #[test]
    fn space_json_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = if seed % 2 == 0 { random_structured_space(&mut r) } else { random_n2s_space(&mut r) };
        let text = space_to_json(&space);
        let back = space_from_json(&text).unwrap();
        prop_assert_eq!(back.mesh(), space.mesh());
        prop_assert_eq!(back.weights(), space.weights());
        prop_assert_eq!(space_to_json(&back), text);
    }

    #[test]
    fn dyadic_area_is_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_structured_space(&mut r);
        let area = space.mesh().elements().iter().fold(Dyadic::from_int(0), |acc, e| acc + e.rect.area());
        prop_assert_eq!(area, space.mesh().domain().area());
    }
}
