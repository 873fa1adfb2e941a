mod common;

use std::f64::consts::PI;

use common::*;
use lrspline::n2s::{markers, n2s_pipeline, nested_map, PipelineOptions};
use lrspline::poisson::{self, error_norms, layer, solve_poisson, Strategy};
use lrspline::qi::{lr_qi, qi_max_error, tensor_qi, three_peaks};
use lrspline::{LRSpace, Rect};
use nalgebra::SymmetricEigen;
use rand::Rng;

#[test]
fn qi_reproduces_polynomials_on_pipeline_spaces() {
    let mut r = rng(41);
    for space in peaks_spaces(3) {
        assert!(nested_map(&space).is_empty());
        for _ in 0..5 {
            let g = random_polynomial(&mut r, (2, 2));
            let c = lr_qi(&space, &g).unwrap();
            assert!(qi_max_error(&space, &c, &g, (60, 60)) <= 1e-10);
        }
    }
    for seed in 0..4 {
        let mut r = rng(seed);
        let space = random_n2s_space(&mut r);
        let g = random_polynomial(&mut r, space.bidegree());
        let c = lr_qi(&space, &g).unwrap();
        assert!(qi_max_error(&space, &c, &g, (50, 50)) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn qi_error_is_preserved_by_local_refinement() {
    let spaces = peaks_spaces(3);
    let one = d(1);
    let dom = Rect::new(-one, one, -one, one).unwrap();
    let tensor = LRSpace::uniform(dom, (2, 2), (16, 16)).unwrap();
    let et = qi_max_error(&tensor, &tensor_qi(&tensor, &three_peaks).unwrap(), &three_peaks, (150, 150));
    let en = qi_max_error(&spaces[2], &lr_qi(&spaces[2], &three_peaks).unwrap(), &three_peaks, (150, 150));
    assert!((en - et).abs() <= 0.05 * et, "{en} vs {et}");
    assert!(spaces[2].len() < tensor.len());
}

#[test]
fn patch_test_on_locally_refined_space() {
    let start = LRSpace::uniform(Rect::unit_square(), (2, 2), (2, 2)).unwrap();
    let (space, _) = n2s_pipeline(&start, markers::diagonal, 3, PipelineOptions::default()).unwrap();
    assert!(!space.mesh().is_tensor());
    let u = |x: f64, y: f64| 1.0 + x - 2.0 * y + x * x - 0.5 * x * y + 0.75 * y * y + x * x * y * y;
    let f = |x: f64, y: f64| -(3.5 + 2.0 * x * x + 2.0 * y * y);
    let c = solve_poisson(&space, &f, &u).unwrap();
    let e = error_norms(&space, &c, &u, 101);
    assert!(e.linf <= 1e-9, "{e:?}");
}

fn sine(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

fn sine_source(x: f64, y: f64) -> f64 {
    2.0 * PI * PI * sine(x, y)
}

#[test]
fn tensor_convergence_rate_is_cubic() {
    let errs: Vec<f64> = [8u32, 16, 32]
        .iter()
        .map(|&n| {
            let s = LRSpace::uniform(Rect::unit_square(), (2, 2), (n, n)).unwrap();
            let c = solve_poisson(&s, &sine_source, &|_, _| 0.0).unwrap();
            error_norms(&s, &c, &sine, 500).l2
        })
        .collect();
    let ratio = errs[2] / errs[1];
    assert!((ratio - 0.125).abs() <= 0.2 * 0.125, "errors {errs:?}");
}

#[test]
fn galerkin_orthogonality_and_definiteness() {
    let space = &peaks_spaces(3)[2];
    let mut sys = poisson::assemble_with(space, &sine_source, poisson::LOAD_CELL).unwrap();
    let red = poisson::impose_dirichlet(&mut sys, space, &sine).unwrap();
    let c = poisson::solve(&red).unwrap();
    let kc = sys.stiffness.mul_vec(&c);
    let scale = sys.load.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = rng(7);
    for _ in 0..20 {
        let i = red.free[r.gen_range(0..red.free.len())];
        assert!((kc[i] - sys.load[i]).abs() <= 1e-9 * scale.max(1.0), "row {i}");
    }
    let k = sys.stiffness.to_dense();
    assert!((&k - k.transpose()).abs().max() <= 1e-12 * k.abs().max());
    let eig = SymmetricEigen::new(red.matrix.to_dense());
    assert!(eig.eigenvalues.min() > 0.0);
}

#[test]
fn l2_estimate_is_grid_stable() {
    let spaces = poisson::level_spaces(Strategy::Tensor, 4, (2, 2), PipelineOptions::default()).unwrap();
    let s = spaces.last().unwrap();
    let c = solve_poisson(s, &layer::source, &layer::solution).unwrap();
    let coarse = error_norms(s, &c, &layer::solution, 500).l2;
    let fine = error_norms(s, &c, &layer::solution, 1000).l2;
    assert!((coarse - fine).abs() <= 0.01 * fine, "{coarse} vs {fine}");
}
