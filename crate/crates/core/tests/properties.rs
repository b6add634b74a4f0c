mod common;

use common::*;
use noisestab::gaussian::{noise_stability, noise_stability_mc, Correlation, Partition};
use noisestab::voting::{discrete_stability_exact, VotingRule};
use proptest::prelude::*;
use proptest::sample::Index;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mehler_gram_is_psd((points, r) in mehler_case()) {
        mehler_holds(&points, r)?;
    }

    #[test]
    fn semigroup_composition((values, r1, r2) in semigroup_case()) {
        semigroup_holds(&values, r1, r2)?;
    }

    #[test]
    fn convexity_identity(case in soft_pair_case()) {
        convexity_holds(&case)?;
    }

    #[test]
    fn quadratic_form_is_nonnegative((d, n, h, r) in quadratic_case()) {
        quadratic_holds(d, n, &h, r)?;
    }

    #[test]
    fn relabeling_candidates((m, n, perm, draws, r) in relabel_case()) {
        relabel_holds(m, n, &perm, &draws, r)?;
    }

    #[test]
    fn rounding_gives_extreme_points(case in soft_pair_case()) {
        rounding_holds(&case)?;
    }

    #[test]
    fn gradient_matches_differences(case in soft_pair_case(), picks in prop::collection::vec(any::<Index>(), 100)) {
        gradient_holds(&case, &picks)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translated_cones_are_symmetric(v in prop::collection::vec(-1.0f64..1.0, 2), s in 0.01f64..0.5, r in 0.05f64..0.9) {
        translation_symmetry_holds(&v, s, r)?;
    }

    #[test]
    fn halfspace_methods_agree(angle in 0.0f64..std::f64::consts::TAU, offset in -1.5f64..1.5, r in -0.9f64..0.9, seed in any::<u64>()) {
        let p = Partition::halfspaces(2, vec![angle.cos(), angle.sin()], offset).unwrap();
        let closed = noise_stability(&p, rho(r)).unwrap();
        let mc = noise_stability_mc(&p, rho(r), 200_000, seed).unwrap();
        prop_assert!((closed.value - mc.value).abs() <= closed.error_estimate + mc.error_estimate,
            "{} vs {} ± {}", closed.value, mc.value, mc.error_estimate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stability_bounded_below_and_monotone((d, n) in small_grid(), m in 2usize..=4, draws in prop::collection::vec(0usize..4, 64)) {
        let g = grid(d, n);
        let labels: Vec<usize> = (0..g.len()).map(|k| draws[k % draws.len()] % m).collect();
        let p = Partition::from_labels(g, &labels, m).unwrap();
        let floor: f64 = p.volume_targets().entries().iter().map(|a| a * a).sum();
        let mut last = f64::NEG_INFINITY;
        for step in 0..10 {
            let s = noise_stability(&p, rho(0.1 * step as f64)).unwrap().value;
            prop_assert!(s >= floor - 1e-6, "{} below {}", s, floor);
            prop_assert!(s >= last - 1e-12, "not monotone: {} after {}", s, last);
            last = s;
        }
    }

    #[test]
    fn plurality_stability_bounds(m in 2usize..=3, n in 1usize..=7, r in 0.001f64..0.999) {
        let s = discrete_stability_exact(&VotingRule::plurality(m, n).unwrap(), Correlation::new(r).unwrap()).unwrap();
        prop_assert!(s >= 1.0 / m as f64 - 1e-12 && s <= 1.0 + 1e-12, "{}", s);
    }
}

#[test]
fn two_candidate_plurality_is_majority() {
    for n in [1usize, 3, 5, 7, 9, 11] {
        let p = VotingRule::plurality(2, n).unwrap();
        let q = VotingRule::majority(n).unwrap();
        let mut ballot = vec![0usize; n];
        for code in 0..(1usize << n) {
            p.decode(code, &mut ballot);
            let one: Vec<usize> = ballot.iter().map(|b| b + 1).collect();
            assert_eq!(p.evaluate(&one).unwrap(), q.evaluate(&one).unwrap());
        }
    }
}
