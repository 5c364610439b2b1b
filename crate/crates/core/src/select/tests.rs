use super::*;
use crate::fixtures;
use rand::Rng;

fn assert_recheck(frame: FrameRef<'_>, r: &SelectionReport) {
    let c = recheck(frame, &r.space, &r.selection, &r.target).unwrap();
    assert!((c.error - r.achieved_error).abs() <= 1e-10, "{} vs {}", c.error, r.achieved_error);
    assert!((c.measure - r.measure).abs() <= 1e-10);
}

#[test]
fn proportional_on_f1_is_exact() {
    let f = fixtures::f1();
    let r = proportional_select(&f, &WeightFn::constant(0.5).unwrap()).unwrap();
    assert_eq!(r.achieved_error, 0.0);
    assert_eq!(r.measure, 1.0);
    assert_eq!(r.intervals, vec![Interval::new(0.0, 0.5), Interval::new(1.0, 1.5)]);
}

#[test]
fn lyapunov_on_random_frames_is_exact() {
    let mut rng = fixtures::rng(4);
    for seed in 0..10 {
        let f = fixtures::random_pcframe(5, 40, seed % 2 == 0, seed);
        let tau = fixtures::random_cell_weight(&mut rng, f.space());
        let r = lyapunov_select(&f, &tau, 0.1).unwrap();
        let norm = f.full_operator().operator_norm();
        assert!(r.achieved_error <= 1e-10 * (1.0 + norm));
        assert_recheck((&f).into(), &r);
    }
}

#[test]
fn atoms_are_rejected() {
    let space = MeasureSpace::new(vec![Cell::atom(CellId::indexed(0), 1.0)]).unwrap();
    let f = PCFrame::new(space, vec![crate::FrameVector::real(&[1.0])]).unwrap();
    assert!(matches!(dyadic_bisect(&f, 0.5, 0.1), Err(Error::AtomNotSplittable(_))));
    assert!(matches!(budget_select(&f, &WeightFn::constant(0.5).unwrap(), 0.1), Err(Error::AtomNotSplittable(_))));
}

#[test]
fn argument_checks() {
    let f = fixtures::f1();
    assert!(matches!(dyadic_bisect(&f, 1.0, 0.1), Err(Error::TauOutOfOpenInterval(_))));
    assert!(matches!(dyadic_bisect(&f, 0.5, 0.0), Err(Error::EpsilonNonpositive(_))));
    assert!(matches!(budget_select(&f, &WeightFn::constant(0.5).unwrap(), -1.0), Err(Error::EpsilonNonpositive(_))));
}

#[test]
fn binary_digits_use_zero_tail() {
    assert_eq!(binary_digits(0.5, 4), vec![true, false, false, false]);
    assert_eq!(binary_digits(0.75, 3), vec![true, true, false]);
    assert_eq!(binary_digits(1.0 / 3.0, 4), vec![false, true, false, true]);
    assert_eq!(expansion_depth(1.0, 0.01), 9);
    assert_eq!(expansion_depth(0.0, 0.01), 1);
}

#[test]
fn dyadic_half_on_f1() {
    let f = fixtures::f1();
    let r = dyadic_bisect(&f, 0.5, 0.01).unwrap();
    assert!(r.achieved_error <= 0.01);
    assert!(r.measure <= 1.0 + MEASURE_SLACK);
    assert!(r.nodes.iter().all(NodeCertificate::holds));
    assert_recheck((&f).into(), &r);
}

#[test]
fn dyadic_sweep_on_random_frame() {
    let f = fixtures::random_pcframe(6, 50, true, 21);
    for k in 1..10 {
        let tau0 = k as f64 / 10.0;
        let r = dyadic_bisect(&f, tau0, 0.01).unwrap();
        assert!(r.achieved_error <= 0.01);
        assert!(r.measure <= tau0 * f.space().total_measure() + MEASURE_SLACK);
        assert!(r.nodes.iter().all(NodeCertificate::holds));
        assert_recheck((&f).into(), &r);
    }
}

#[test]
fn dyadic_on_generator_frame() {
    let g = fixtures::moving_average_genframe(8);
    let r = dyadic_bisect(&g, 0.3, 0.02).unwrap();
    assert!(r.achieved_error <= 0.02, "{}", r.achieved_error);
    assert!(r.measure <= 0.3 + MEASURE_SLACK);
    assert!(r.nodes.iter().all(NodeCertificate::holds), "{:?}", r.nodes.iter().find(|n| !n.holds()));
    assert_recheck((&g).into(), &r);
}

#[test]
fn budget_trivial_levels() {
    let f = fixtures::random_pcframe(3, 10, false, 1);
    let r = budget_select(&f, &WeightFn::constant(0.0).unwrap(), 0.05).unwrap();
    assert!(r.selection.is_empty());
    assert_eq!(r.achieved_error, 0.0);
    let r = budget_select(&f, &WeightFn::constant(1.0).unwrap(), 0.05).unwrap();
    assert_eq!(r.achieved_error, 0.0);
    assert!((r.measure - f.space().total_measure()).abs() < 1e-12);
    let r = budget_select(&fixtures::f1(), &WeightFn::constant(0.5).unwrap(), 0.01).unwrap();
    assert!(r.measure <= 1.0 + 1e-9 && r.achieved_error <= 0.01);
}

#[test]
fn budget_on_level_weights() {
    let mut rng = fixtures::rng(8);
    for seed in 0..5 {
        let f = fixtures::random_pcframe(8, 64, false, seed);
        let tau = fixtures::random_level_weight(&mut rng, f.space(), 4);
        let r = budget_select(&f, &tau, 0.05).unwrap();
        assert!(r.achieved_error <= 0.05);
        assert!(r.measure <= tau.integral(f.space()).unwrap() + 1e-9);
        assert_recheck((&f).into(), &r);
    }
}

#[test]
fn convexity_witness() {
    let mut rng = fixtures::rng(12);
    for seed in 0..5 {
        let f = fixtures::random_pcframe(4, 30, true, 100 + seed);
        let e1 = fixtures::random_cell_set(&mut rng, 30);
        let e2 = fixtures::random_cell_set(&mut rng, 30);
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let tau = fixtures::combination_weight(f.space(), &[(lambda, &e1), (1.0 - lambda, &e2)]);
        let s1 = f.frame_operator(&Selection::cells(f.space(), &e1)).unwrap();
        let s2 = f.frame_operator(&Selection::cells(f.space(), &e2)).unwrap();
        let want = s1.scale(lambda).add(&s2.scale(1.0 - lambda)).unwrap();
        let r = budget_select(&f, &tau, 0.01).unwrap();
        let got = f.frame_operator(&r.selection).unwrap();
        assert!(got.sub(&want).unwrap().operator_norm() <= 0.01);
    }
}

#[test]
fn generator_lyapunov_within_twice_eps() {
    let g = fixtures::moving_average_genframe(6);
    let tau = WeightFn::steps(vec![0.3, 0.7], vec![0.2, 0.9, 0.5]).unwrap();
    let r = lyapunov_select(&g, &tau, 0.05).unwrap();
    assert!(r.achieved_error <= 0.1);
    assert!(r.quantization.is_some());
    assert_recheck((&g).into(), &r);
    let r = lyapunov_select(&g, &WeightFn::constant(1.0).unwrap(), 0.05).unwrap();
    assert!(r.achieved_error < 1e-12);
}

#[test]
fn generator_budget_with_steps_and_linear() {
    let g = fixtures::moving_average_genframe(4);
    let tau = WeightFn::steps(vec![0.5], vec![0.25, 1.0]).unwrap();
    let r = budget_select(&g, &tau, 0.05).unwrap();
    assert!(r.achieved_error <= 0.05);
    assert!(r.measure <= 0.625 + 1e-9);
    let r = budget_select(&g, &WeightFn::linear(1.0).unwrap(), 0.1).unwrap();
    assert!(r.achieved_error <= 0.1);
    assert!(r.measure <= 0.5 + 1e-9);
    let point = WeightFn::point(|t| t * t);
    assert!(matches!(budget_select(&g, &point, 0.1), Err(Error::UnsupportedWeight(_))));
}

#[test]
fn intervals_round_trip_through_cells() {
    let g = fixtures::moving_average_genframe(3);
    let e = vec![Interval::new(0.1, 0.25), Interval::new(0.6, 1.0)];
    let (space, sel) = space_from_intervals(&g, &e).unwrap();
    assert!((space.total_measure() - 1.0).abs() < 1e-15);
    let back = merge_intervals(sel.prefix_intervals(&space).unwrap());
    assert_eq!(back.len(), 2);
    for (a, b) in back.iter().zip(&e) {
        assert!((a.start - b.start).abs() < 1e-15 && (a.end - b.end).abs() < 1e-15);
    }
}
