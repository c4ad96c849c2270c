//! Property tests over random source parameters.

use proptest::prelude::*;

use maoii::metrics::{aoii_pmf, maoii_value_limit, maoii_value_series, MaoiiLadder, Penalty};
use maoii::policy_eval::{avg_maoii_closed, avg_penalty_series, stationary_probability};
use maoii::sim::select_top_m;
use maoii::source::{pi_k, pi_k_recursive};
use maoii::whittle::{first_decrease, whittle_maoii, whittle_maoii_limit, WhittleTable};
use maoii::{Metric, SourceParams};

fn params() -> impl Strategy<Value = SourceParams> {
    (2u32..=12, 0.0f64..1.0, 0.05f64..=1.0).prop_map(|(n, frac, rho)| {
        // r ranges over (0, 1/N] so that p >= r
        let r = (0.01 + 0.99 * frac) / f64::from(n);
        SourceParams::from_r(r, n, rho).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constraint_holds(s in params()) {
        let sum = s.p() + f64::from(s.n_states() - 1) * s.r();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(s.p() >= s.r());
    }

    #[test]
    fn belief_stays_in_range_and_decreases(s in params(), k in 0u32..200) {
        let a = pi_k(&s, k);
        let b = pi_k(&s, k + 1);
        prop_assert!(b <= a + 1e-15);
        prop_assert!(b >= 1.0 / f64::from(s.n_states()) - 1e-15);
        prop_assert!((a - pi_k_recursive(&s, k)).abs() < 1e-12);
    }

    #[test]
    fn pmf_is_a_distribution(s in params(), j in 0u32..150) {
        let pmf = aoii_pmf(&s, j);
        prop_assert!(pmf.iter().all(|&w| w >= 0.0));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_increases_below_limit(s in params()) {
        let ladder = MaoiiLadder::new(s, 300);
        let limit = maoii_value_limit(&s).unwrap();
        let values = ladder.values();
        // once converged, consecutive values differ only by rounding
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12 * limit));
        prop_assert!(values.iter().all(|&b| b <= limit * (1.0 + 1e-12)));
        prop_assert!((ladder.value(37) - maoii_value_series(&s, 37)).abs() < 1e-10);
    }

    #[test]
    fn stationary_law_sums_to_one(rho in 0.05f64..=1.0, n in 1u32..40) {
        let total: f64 = (1..=n + 2000).map(|j| stationary_probability(rho, n, j)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn average_matches_series(s in params(), n in 1u32..30) {
        let closed = avg_maoii_closed(&s, n).unwrap();
        let series = avg_penalty_series(&s, n, Metric::Maoii, 1e-13).unwrap();
        prop_assert!((closed - series).abs() < 1e-9 * series.max(1.0));
    }

    #[test]
    fn index_is_nondecreasing_and_bounded(s in params()) {
        let table = WhittleTable::build(s, Metric::Maoii, 400).unwrap();
        prop_assert_eq!(first_decrease(table.indices()), None);
        let sup = whittle_maoii_limit(&s).unwrap();
        prop_assert!(whittle_maoii(&s, 400).unwrap() <= sup * (1.0 + 1e-12));
    }

    #[test]
    fn top_m_picks_largest(values in prop::collection::vec(0.0f64..10.0, 1..30), m in 0usize..35) {
        let picked = select_top_m(&values, m);
        prop_assert_eq!(picked.len(), m.min(values.len()));
        let cutoff = picked.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
        for (i, &v) in values.iter().enumerate() {
            if !picked.contains(&i) {
                prop_assert!(v <= cutoff);
            }
        }
    }
}
