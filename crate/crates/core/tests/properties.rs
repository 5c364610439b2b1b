use frame_lyapunov::fixtures::{self, rng};
use frame_lyapunov::povm::{povm_evaluate, povm_select, OperatorDensity};
use frame_lyapunov::select::discrete::{aw_subset_exhaustive, aw_subset_heuristic, Strategy};
use frame_lyapunov::select::{budget_select, dyadic_bisect, lyapunov_select, recheck, SelectionReport};
use frame_lyapunov::{loewner_leq, CellId, MeasureSpace, PCFrame, Selection};
use proptest::prelude::*;
use rand::Rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 32, ..ProptestConfig::default() }
}

fn assert_recheck(f: &PCFrame, r: &SelectionReport) -> Result<(), TestCaseError> {
    let c = recheck(f, &r.space, &r.selection, &r.target).unwrap();
    prop_assert!((c.error - r.achieved_error).abs() <= 1e-10);
    prop_assert!((c.measure - r.measure).abs() <= 1e-10);
    Ok(())
}

fn random_density(seed: u64, cells: usize, d: usize) -> OperatorDensity {
    let mut rng = rng(seed);
    let measures: Vec<f64> = (0..cells).map(|_| rng.random_range(0.1..2.0)).collect();
    let values = (0..cells).map(|_| fixtures::random_psd(&mut rng, d, 2, seed % 2 == 0)).collect();
    OperatorDensity::new(MeasureSpace::from_measures(&measures).unwrap(), values).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn split_preserves_total(seed in any::<u64>(), cells in 1usize..20, fraction in 0.01f64..0.99) {
        let f = fixtures::random_pcframe(2, cells, false, seed);
        let space = f.space();
        let id = space.cells()[seed as usize % cells].id.clone();
        let (split, left, right) = space.split_cell(&id, fraction).unwrap();
        prop_assert!((split.total_measure() - space.total_measure()).abs() <= 1e-12 * space.total_measure());
        prop_assert_eq!(left.parent(), Some(id.clone()));
        prop_assert_eq!(right.parent(), Some(id));
    }

    #[test]
    fn refine_uniform_respects_bound(seed in any::<u64>(), bound in 0.05f64..1.0) {
        let f = fixtures::random_pcframe(1, 8, false, seed);
        let fine = f.space().refine_uniform(bound).unwrap();
        prop_assert!(fine.cells().iter().all(|c| c.measure <= bound));
        prop_assert!((fine.total_measure() - f.space().total_measure()).abs() <= 1e-12);
    }

    #[test]
    fn cell_ids_round_trip(root in 0usize..1000, bits in proptest::collection::vec(any::<bool>(), 0..12)) {
        let mut id = CellId::indexed(root);
        for b in &bits {
            id = id.child(*b);
        }
        prop_assert_eq!(CellId::parse(id.as_str()).unwrap(), id.clone());
        prop_assert_eq!(id.depth(), bits.len());
        prop_assert_eq!(id.lineage().last().unwrap(), CellId::indexed(root));
    }

    #[test]
    fn frame_operator_is_additive(seed in any::<u64>(), cells in 2usize..30, d in 1usize..6) {
        let f = fixtures::random_pcframe(d, cells, seed % 2 == 0, seed);
        let mut rng = rng(seed);
        let a = fixtures::random_cell_set(&mut rng, cells);
        let b: Vec<usize> = (0..cells).filter(|i| !a.contains(i)).collect();
        let sa = f.frame_operator(&Selection::cells(f.space(), &a)).unwrap();
        let sb = f.frame_operator(&Selection::cells(f.space(), &b)).unwrap();
        let full = f.full_operator();
        prop_assert!(sa.add(&sb).unwrap().sub(&full).unwrap().operator_norm() <= 1e-12 * (1.0 + full.operator_norm()));
        prop_assert!(loewner_leq(&sa, &full, 1e-12).unwrap());
    }

    #[test]
    fn refinement_leaves_operator_unchanged(seed in any::<u64>(), cells in 1usize..12, bound in 0.1f64..0.8) {
        let f = fixtures::random_pcframe(3, cells, true, seed);
        let fine = f.pullback(f.space().refine_uniform(bound).unwrap()).unwrap();
        let diff = fine.full_operator().sub(&f.full_operator()).unwrap().operator_norm();
        prop_assert!(diff <= 1e-12 * (1.0 + f.full_operator().operator_norm()));
    }

    #[test]
    fn proportional_selection_is_exact(seed in any::<u64>(), cells in 1usize..64, d in 1usize..8) {
        let f = fixtures::random_pcframe(d, cells, seed % 3 == 0, seed);
        let tau = fixtures::random_cell_weight(&mut rng(seed ^ 1), f.space());
        let r = lyapunov_select(&f, &tau, 0.01).unwrap();
        prop_assert!(r.achieved_error <= 1e-10 * (1.0 + f.full_operator().operator_norm()));
        assert_recheck(&f, &r)?;
    }

    #[test]
    fn dyadic_certificates_hold(seed in any::<u64>(), tau0 in 0.01f64..0.99, eps in 0.005f64..0.2) {
        let f = fixtures::random_pcframe(4, 24, seed % 2 == 1, seed);
        let r = dyadic_bisect(&f, tau0, eps).unwrap();
        prop_assert!(r.achieved_error <= eps);
        prop_assert!(r.measure <= tau0 * f.space().total_measure() + 1e-12);
        for n in &r.nodes {
            prop_assert!(n.holds(), "node {} fails", n.word);
            prop_assert!(n.depth == 0 || n.telescoped < 0.5f64.powi(n.depth as i32) * eps);
        }
        assert_recheck(&f, &r)?;
    }

    #[test]
    fn budget_measure_is_bounded(seed in any::<u64>(), levels in 1usize..6, eps in 0.01f64..0.2) {
        let f = fixtures::random_pcframe(5, 40, seed % 2 == 0, seed);
        let tau = fixtures::random_level_weight(&mut rng(seed ^ 2), f.space(), levels);
        let r = budget_select(&f, &tau, eps).unwrap();
        prop_assert!(r.achieved_error <= eps);
        prop_assert!(r.measure <= tau.integral(f.space()).unwrap() + 1e-9);
        assert_recheck(&f, &r)?;
    }

    #[test]
    fn convex_combinations_are_reachable(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let f = fixtures::random_pcframe(4, 32, true, seed);
        let mut rng = rng(seed ^ 3);
        let e1 = fixtures::random_cell_set(&mut rng, 32);
        let e2 = fixtures::random_cell_set(&mut rng, 32);
        let tau = fixtures::combination_weight(f.space(), &[(lambda, &e1), (1.0 - lambda, &e2)]);
        let s1 = f.frame_operator(&Selection::cells(f.space(), &e1)).unwrap();
        let s2 = f.frame_operator(&Selection::cells(f.space(), &e2)).unwrap();
        let want = s1.scale(lambda).add(&s2.scale(1.0 - lambda)).unwrap();
        let r = budget_select(&f, &tau, 0.01).unwrap();
        let got = f.frame_operator(&r.selection).unwrap();
        prop_assert!(got.sub(&want).unwrap().operator_norm() <= 0.01);
    }

    #[test]
    fn heuristics_never_beat_the_oracle(seed in any::<u64>(), n in 1usize..12, d in 1usize..5) {
        let (vectors, tau) = fixtures::random_bessel_instance(n, d, 0.2, seed);
        let oracle = aw_subset_exhaustive(&vectors, &tau, 24).unwrap();
        for s in Strategy::ALL {
            prop_assert!(aw_subset_heuristic(&vectors, &tau, s, seed).unwrap().error >= oracle.error);
        }
    }

    #[test]
    fn povm_is_additive_monotone_and_bounded(seed in any::<u64>(), cells in 2usize..20, d in 1usize..5) {
        let density = random_density(seed, cells, d);
        let mut rng = rng(seed ^ 4);
        let a = fixtures::random_cell_set(&mut rng, cells);
        let b: Vec<usize> = (0..cells).filter(|i| !a.contains(i)).collect();
        let pa = povm_evaluate(&density, &Selection::cells(density.space(), &a)).unwrap();
        let pb = povm_evaluate(&density, &Selection::cells(density.space(), &b)).unwrap();
        let full = povm_evaluate(&density, &Selection::full(density.space())).unwrap();
        let bessel = full.operator_norm();
        prop_assert!(pa.add(&pb).unwrap().sub(&full).unwrap().operator_norm() <= 1e-12 * (1.0 + bessel));
        prop_assert!(loewner_leq(&pa, &full, 1e-12).unwrap());
        prop_assert!(pa.operator_norm() <= bessel * (1.0 + 1e-12));
    }

    #[test]
    fn povm_convexity_witness(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let density = random_density(seed, 24, 3);
        let mut rng = rng(seed ^ 5);
        let e1 = fixtures::random_cell_set(&mut rng, 24);
        let e2 = fixtures::random_cell_set(&mut rng, 24);
        let tau = fixtures::combination_weight(density.space(), &[(lambda, &e1), (1.0 - lambda, &e2)]);
        let p1 = povm_evaluate(&density, &Selection::cells(density.space(), &e1)).unwrap();
        let p2 = povm_evaluate(&density, &Selection::cells(density.space(), &e2)).unwrap();
        let want = p1.scale(lambda).add(&p2.scale(1.0 - lambda)).unwrap();
        let r = povm_select(&density, &tau, 0.01).unwrap();
        let got = povm_evaluate(&density, &r.selection).unwrap();
        prop_assert!(got.sub(&want).unwrap().operator_norm() <= 0.02);
    }

    #[test]
    fn rank_one_density_matches_frame(seed in any::<u64>(), cells in 1usize..30, d in 1usize..6) {
        let f = fixtures::random_pcframe(d, cells, seed % 2 == 0, seed);
        let density = OperatorDensity::rank_one(&f);
        let tau = fixtures::random_cell_weight(&mut rng(seed ^ 6), f.space());
        let p = povm_select(&density, &tau, 0.01).unwrap();
        let l = lyapunov_select(&f, &tau, 0.01).unwrap();
        prop_assert_eq!(&p.selection, &l.selection);
        prop_assert!(p.target.sub(&l.target).unwrap().operator_norm() <= 1e-12);
    }

    #[test]
    fn selection_json_round_trips(seed in any::<u64>(), cells in 1usize..20) {
        let f = fixtures::random_pcframe(2, cells, false, seed);
        let tau = fixtures::random_cell_weight(&mut rng(seed), f.space());
        let sel = lyapunov_select(&f, &tau, 0.1).unwrap().selection;
        let back: Selection = serde_json::from_str(&serde_json::to_string(&sel).unwrap()).unwrap();
        prop_assert_eq!(back, sel);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn quantization_bounds_sampled_weights(seed in any::<u64>(), d in 2usize..12) {
        let g = fixtures::moving_average_genframe(d);
        let (pc, cert) = frame_lyapunov::quantize(&g, 0.05).unwrap();
        prop_assert!(cert.integrated_bound <= 0.05);
        let mut rng = rng(seed);
        for _ in 0..4 {
            let tau = fixtures::random_steps(&mut rng, 1.0, 5);
            let exact = g.weighted_operator(&tau).unwrap();
            let approx = pc.weighted_frame_operator(&tau).unwrap();
            prop_assert!(exact.sub(&approx).unwrap().operator_norm() <= 0.05);
        }
    }

    #[test]
    fn generator_bisection_meets_bounds(tau0 in 0.05f64..0.95) {
        let g = fixtures::moving_average_genframe(4);
        let r = dyadic_bisect(&g, tau0, 0.05).unwrap();
        prop_assert!(r.achieved_error <= 0.05);
        prop_assert!(r.measure <= tau0 + 1e-12);
        prop_assert!(r.nodes.iter().all(|n| n.holds()));
    }

    #[test]
    fn generator_selection_within_twice_eps(seed in any::<u64>()) {
        let g = fixtures::moving_average_genframe(5);
        let tau = fixtures::random_steps(&mut rng(seed), 1.0, 4);
        let r = lyapunov_select(&g, &tau, 0.05).unwrap();
        prop_assert!(r.achieved_error <= 0.1);
    }
}
