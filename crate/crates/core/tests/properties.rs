use asg_cdi::analytics::{asg_step_moments, kingman_step_moment, HittingTable};
use asg_cdi::engine::{
    apply_mark, simulate_coupled, simulate_selective_path, Coordinate, Mark, StopRule,
};
use asg_cdi::experiments::scan_path;
use asg_cdi::stats::rng::stream_for;
use asg_cdi::ModelParams;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.0..3.0f64, 0.0..3.0f64).prop_map(|(t, s)| ModelParams::new(t, s).unwrap())
}

/// Counts `[k, m, a]` with `m <= k`, `m <= a`, `k >= 1`, `a >= 1`.
fn counts() -> impl Strategy<Value = [u32; 3]> {
    (0u32..50, 0u32..50, 0u32..50).prop_map(|(m, dk, da)| [m + dk + 1, m, m + da + 1])
}

fn mark(top: u32) -> impl Strategy<Value = Mark> {
    prop_oneof![
        (1..top.max(2), 0u32..100).prop_map(move |(i, d)| {
            let j = i + 1 + d % top.max(2);
            Mark::PairCoalescence { i, j }
        }),
        (1..=top).prop_map(|i| Mark::MutationKill { i }),
        (1..=top).prop_map(|i| Mark::SelectionBranch { i }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coupled_paths_stay_ordered(p in params(), n0 in 2u32..300, seed in any::<u64>()) {
        let mut rng = stream_for(seed, 0);
        let tr = simulate_coupled(&p, n0, 0.0, &StopRule::all_at_level(1), &mut rng).unwrap();
        prop_assert_eq!(tr.coupling_violations(), 0);
        for e in tr.events() {
            prop_assert!(e.counts[1] <= e.counts[0] && e.counts[1] <= e.counts[2]);
        }
    }

    #[test]
    fn thinning_moves_each_count_by_at_most_one(c in counts(), m in mark(120)) {
        let (after, hit) = apply_mark(c, m);
        for i in 0..3 {
            prop_assert_eq!(after[i] != c[i], hit[i]);
            prop_assert!(after[i].abs_diff(c[i]) <= 1);
        }
        prop_assert!(after[1] <= after[0] && after[1] <= after[2]);
        if let Mark::PairCoalescence { j, .. } = m {
            prop_assert!(!hit[1] || (hit[0] && hit[2]));
            prop_assert_eq!(hit[0], c[0] >= j);
        }
    }

    #[test]
    fn same_seed_same_trajectory(p in params(), n0 in 2u32..100, seed in any::<u64>()) {
        let stop = StopRule::all_at_level(1);
        let a = simulate_coupled(&p, n0, 0.0, &stop, &mut stream_for(seed, 3)).unwrap();
        let b = simulate_coupled(&p, n0, 0.0, &stop, &mut stream_for(seed, 3)).unwrap();
        prop_assert_eq!(a.events(), b.events());
    }

    #[test]
    fn without_selection_or_mutation_paths_coincide(n0 in 2u32..300, seed in any::<u64>()) {
        let p = ModelParams::kingman();
        let tr = simulate_coupled(&p, n0, 0.0, &StopRule::all_at_level(1), &mut stream_for(seed, 0)).unwrap();
        prop_assert!(tr.events().iter().all(|e| e.applied == [true; 3]));
        prop_assert_eq!(tr.path(Coordinate::Kingman), tr.path(Coordinate::Selection));
    }

    #[test]
    fn path_identities_hold(p in params(), n0 in 50u32..2000, start in 0.0..1e-3f64, seed in any::<u64>()) {
        let mut rng = stream_for(seed, 0);
        let path = simulate_selective_path(&p, n0, start, 0.05, 1 << 30, &mut rng).unwrap();
        let times = [start + 1e-3, 0.01, 0.05];
        for s in scan_path(&path, &p, &times).unwrap() {
            prop_assert!(s.y_identity_residual().abs() < 1e-8, "{}", s.y_identity_residual());
            if s.origin.is_finite() {
                prop_assert!(s.decomposition_residual().abs() < 1e-8, "{}", s.decomposition_residual());
            }
            prop_assert!(s.max_abs_x >= s.x.abs());
            prop_assert!(s.max_abs_x_minus_y >= (s.x - s.y).abs() - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn selection_lengthens_steps(theta in 0.0..3.0f64, sigma in 0.01..3.0f64, n in 2usize..200) {
        let p = ModelParams::new(theta, sigma).unwrap();
        let table = asg_step_moments(&p, 400, 3).unwrap();
        let a1 = table.get(n, 1).unwrap();
        let a2 = table.get(n, 2).unwrap();
        prop_assert!(a1 > kingman_step_moment(n, 1, theta).unwrap());
        prop_assert!(a2 >= a1 * a1);
        prop_assert!(table.get(n, 3).unwrap() * a1 >= a2 * a2 * (1.0 - 1e-12));
    }

    #[test]
    fn nu_sandwich_on_computed_values(p in params(), log_t in -4.0..-0.5f64) {
        let t = 10f64.powf(log_t);
        let table = HittingTable::new(&p, 100_000, 1).unwrap();
        let s = table.nu(t).unwrap();
        prop_assert!(s.sandwich_holds());
        prop_assert!(s.mean_at_nu <= t);
    }
}
