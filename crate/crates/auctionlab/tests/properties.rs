//! Randomized invariants: determinism, payment bounds, rule equivalences,
//! enumeration cross-checks, revenue floors, and strategyproofness on small
//! random markets.

use auctionlab::audit::{audit_instance, AuditOptions};
use auctionlab::engine::{self, milestones, AllocRule, EngineOptions};
use auctionlab::eval;
use auctionlab::instance::{exact_grid, AuctionParams, BidderId, BidderType, Instance, Prediction};
use auctionlab::lp;
use auctionlab::rational::{ratio, Extended, Rational};
use proptest::prelude::*;

/// Bidders with pairwise distinct values (`raw + i/1000` keeps any two
/// apart) and short integer windows, the worst case for event ties.
fn arb_bidders(n: usize) -> impl Strategy<Value = Vec<BidderType>> {
    (
        prop::collection::vec(0i64..=12, n),
        prop::collection::vec((0i64..=8, 0i64..=8), n),
    )
        .prop_map(|(raws, windows)| {
            raws.into_iter()
                .zip(windows)
                .enumerate()
                .map(|(i, (raw, (arrival, length)))| {
                    BidderType::new(
                        ratio(arrival, 1),
                        ratio(arrival + length, 1),
                        ratio(raw * 1000 + i as i64, 1000),
                    )
                    .expect("nonnegative window and value")
                })
                .collect()
        })
}

/// A full engine input: random market, a grid alpha, gamma in {1/4 .. 1},
/// and a nonnegative prediction on the same scale as the values.
fn engine_case(max_n: usize) -> impl Strategy<Value = (Instance, AuctionParams, Prediction)> {
    (2..=max_n).prop_flat_map(|n| {
        let grid = exact_grid(n);
        (
            arb_bidders(n),
            0..grid.len(),
            0..n,
            0i64..=52,
            1i64..=4,
        )
            .prop_map(move |(bidders, grid_index, rotation, pred_quarters, gamma_quarters)| {
                let tie_break = (0..n).map(|i| BidderId((i + rotation) % n)).collect();
                let instance = Instance::new(bidders, tie_break).expect("valid bidders");
                let params = AuctionParams::new(
                    grid[grid_index].clone(),
                    ratio(gamma_quarters, 4),
                    n,
                )
                .expect("grid alpha and quarter gamma are in range");
                let prediction =
                    Prediction::new(ratio(pred_quarters, 4)).expect("nonnegative prediction");
                (instance, params, prediction)
            })
    })
}

fn top_two(instance: &Instance) -> (Rational, Rational) {
    let mut values: Vec<Rational> = instance.bidders().iter().map(|b| b.value.clone()).collect();
    values.sort();
    values.reverse();
    (values[0].clone(), values[1].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn repeated_runs_agree((instance, params, prediction) in engine_case(5)) {
        let first = engine::run(&instance, &params, &prediction).unwrap();
        let second = engine::run(&instance, &params, &prediction).unwrap();
        prop_assert_eq!(first, second);
        let alloc_a = engine::alloc(&instance, &params, &prediction).unwrap();
        let alloc_b = engine::alloc(&instance, &params, &prediction).unwrap();
        prop_assert_eq!(alloc_a, alloc_b);
    }

    #[test]
    fn payments_stay_between_zero_and_the_clinch_threshold(
        (instance, params, prediction) in engine_case(5),
    ) {
        let outcome = engine::run(&instance, &params, &prediction).unwrap();
        match (&outcome.winner, &outcome.price) {
            (Some(winner), Some(price)) => {
                prop_assert!(price >= &ratio(0, 1));
                // A bidder only clinches when her value meets the threshold,
                // and the rerun step can only lower the price from there.
                prop_assert!(price <= &instance.bidder(*winner).value);
                prop_assert_eq!(&outcome.revenue, price);
                prop_assert_eq!(&outcome.welfare, &instance.bidder(*winner).value);
                if let Extended::Finite(tau) = &outcome.threshold {
                    prop_assert!(price <= tau);
                }
            }
            (None, None) => {
                prop_assert_eq!(&outcome.revenue, &ratio(0, 1));
                prop_assert_eq!(&outcome.welfare, &ratio(0, 1));
            }
            _ => prop_assert!(false, "winner and price must be present together"),
        }
    }

    #[test]
    fn unit_discount_matches_the_undiscounted_auction(
        (instance, params, prediction) in engine_case(5),
    ) {
        let three_phase =
            AuctionParams::three_phase(params.alpha().clone(), params.n()).unwrap();
        let discounted =
            AuctionParams::new(params.alpha().clone(), ratio(1, 1), params.n()).unwrap();
        let a = engine::run(&instance, &three_phase, &prediction).unwrap();
        let b = engine::run(&instance, &discounted, &prediction).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn one_shot_updates_match_recomputation_between_milestones(
        (instance, params, prediction) in engine_case(5),
    ) {
        let ms = milestones(params.n(), params.alpha());
        prop_assume!(ms.i1_count < ms.i2_count);
        let recompute = EngineOptions {
            alloc_rule: AllocRule::Recompute,
            ..EngineOptions::default()
        };
        let two_shot = EngineOptions {
            alloc_rule: AllocRule::TwoOneShotUpdates,
            ..EngineOptions::default()
        };
        let a = engine::run_with(&instance, &params, &prediction, &recompute).unwrap();
        let b = engine::run_with(&instance, &params, &prediction, &two_shot).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn instance_json_round_trips((instance, _, _) in engine_case(5)) {
        let text = instance.to_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(back, instance);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ordinal_enumeration_matches_the_rerun_reference(
        (instance, params, prediction) in engine_case(4),
    ) {
        let values: Vec<Rational> =
            instance.bidders().iter().map(|b| b.value.clone()).collect();
        let intervals: Vec<(Rational, Rational)> = instance
            .bidders()
            .iter()
            .map(|b| (b.arrival.clone(), b.departure.clone()))
            .collect();
        let fast =
            eval::exact_expected_revenue(&values, &intervals, &params, &prediction, 6).unwrap();
        let slow = eval::exact_expected_revenue_reference(
            &values, &intervals, &params, &prediction, 6,
        )
        .unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn consistency_meets_alpha_under_a_perfect_prediction(
        (instance, params, _) in engine_case(5),
    ) {
        let values: Vec<Rational> =
            instance.bidders().iter().map(|b| b.value.clone()).collect();
        let intervals: Vec<(Rational, Rational)> = instance
            .bidders()
            .iter()
            .map(|b| (b.arrival.clone(), b.departure.clone()))
            .collect();
        let three_phase =
            AuctionParams::three_phase(params.alpha().clone(), params.n()).unwrap();
        let ratio_got =
            eval::consistency_ratio(&values, &intervals, &three_phase, 6).unwrap();
        prop_assert!(
            ratio_got >= *params.alpha(),
            "consistency {} below alpha {}",
            ratio_got,
            params.alpha()
        );
    }

    #[test]
    fn revenue_floors_hold_on_random_markets(
        (instance, params, prediction) in engine_case(5),
    ) {
        let values: Vec<Rational> =
            instance.bidders().iter().map(|b| b.value.clone()).collect();
        let intervals: Vec<(Rational, Rational)> = instance
            .bidders()
            .iter()
            .map(|b| (b.arrival.clone(), b.departure.clone()))
            .collect();
        let (_, second) = top_two(&instance);
        prop_assume!(second > ratio(0, 1));
        let report =
            eval::error_tolerance_check(&values, &intervals, &params, &prediction, 6).unwrap();
        prop_assert!(
            report.passed,
            "floor failed: revenue {} robustness floor {} consistency floor {:?}",
            report.expected_revenue,
            report.robustness_floor,
            report.consistency_floor
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_rule_statistics_agree_with_enumeration(
        eighths in prop::collection::vec(0i64..=8, 2..=5),
    ) {
        let stop: Vec<Rational> = eighths.into_iter().map(|e| ratio(e, 8)).collect();
        let stats = lp::rule_stats(&stop).unwrap();
        let slow = lp::rule_stats_enumerated(&stop).unwrap();
        prop_assert_eq!(&stats, &slow);
        // The induced selection probabilities always satisfy the program's
        // constraints, so every rule is bounded by the dual certificate.
        prop_assert!(lp::check_primal_feasibility(&stats.selection).is_ok());
        let cert = lp::dual_certificate(stop.len()).unwrap();
        prop_assert!(stats.success_probability <= cert.objective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn no_profitable_deviation_exists_on_small_markets(
        (instance, params, prediction) in engine_case(4),
    ) {
        let report =
            audit_instance(&instance, &params, &prediction, &AuditOptions::default())
                .unwrap();
        prop_assert!(
            report.truthful_dominates,
            "profitable deviation found: {:?}",
            report.witness
        );
    }
}

#[test]
fn monte_carlo_agrees_with_exact_enumeration() {
    let values = vec![ratio(9, 1), ratio(3, 1), ratio(5, 1), ratio(2, 1)];
    let intervals = vec![
        (ratio(0, 1), ratio(10, 1)),
        (ratio(1, 1), ratio(2, 1)),
        (ratio(3, 1), ratio(4, 1)),
        (ratio(5, 1), ratio(6, 1)),
    ];
    let params = AuctionParams::three_phase(ratio(1, 2), 4).unwrap();
    let prediction = Prediction::new(ratio(8, 1)).unwrap();
    let exact = eval::exact_expected_revenue(&values, &intervals, &params, &prediction, 6)
        .unwrap();
    let exact_f = auctionlab::rational::rational_to_f64(&exact);
    for seed in [0u64, 1, 99] {
        let mc =
            eval::mc_expected_revenue(&values, &intervals, &params, &prediction, 4000, seed)
                .unwrap();
        let tolerance = 6.0 * mc.stderr + 1e-9;
        assert!(
            (mc.mean - exact_f).abs() <= tolerance,
            "seed {seed}: mc mean {} vs exact {exact_f} (tolerance {tolerance})",
            mc.mean
        );
    }
}

#[test]
fn monte_carlo_is_reproducible_for_a_fixed_seed() {
    let values = vec![ratio(7, 1), ratio(1, 1), ratio(4, 1)];
    let intervals = vec![
        (ratio(0, 1), ratio(6, 1)),
        (ratio(1, 1), ratio(3, 1)),
        (ratio(2, 1), ratio(5, 1)),
    ];
    let params = AuctionParams::three_phase(ratio(1, 3), 3).unwrap();
    let prediction = Prediction::new(ratio(7, 1)).unwrap();
    let a = eval::mc_expected_revenue(&values, &intervals, &params, &prediction, 500, 42)
        .unwrap();
    let b = eval::mc_expected_revenue(&values, &intervals, &params, &prediction, 500, 42)
        .unwrap();
    assert_eq!(a, b);
    let c = eval::mc_expected_revenue(&values, &intervals, &params, &prediction, 500, 43)
        .unwrap();
    assert_ne!(a.mean, c.mean, "different seeds should sample differently");
}
