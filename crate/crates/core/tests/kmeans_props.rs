use centroid_leak_core::kmeans::{self, ClusterConfig, InitMethod};
use centroid_leak_core::matrix::BinaryMatrix;
use centroid_leak_core::oracle::true_system;
use centroid_leak_core::Dataset;
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..=25, 1usize..=3).prop_flat_map(|(n, d)| {
        proptest::collection::vec(-50i64..=50, n * d)
            .prop_map(move |v| Dataset::new(n, d, v).unwrap())
    })
}

fn config() -> impl Strategy<Value = (Dataset, ClusterConfig)> {
    (
        dataset(),
        1usize..=5,
        1usize..=10,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(ds, k, max_iter, seed, pp)| {
            let k = k.min(ds.n());
            let init = if pp {
                InitMethod::KmeansPlusPlus
            } else {
                InitMethod::Forgy
            };
            (
                ds,
                ClusterConfig {
                    init,
                    ..ClusterConfig::new(k, max_iter, seed)
                },
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sums_conserve_dataset_total((ds, cfg) in config()) {
        let run = kmeans::run(&ds, &cfg).unwrap();
        let total = ds.column_totals();
        for s in run.trace.sums() {
            prop_assert_eq!(s.column_totals(), total.clone());
        }
    }

    #[test]
    fn ground_truth_reproduces_trace((ds, cfg) in config()) {
        let run = kmeans::run(&ds, &cfg).unwrap();
        let w: &BinaryMatrix = &run.truth.w_true;
        prop_assert_eq!(w.rows(), cfg.k * run.trace.len());
        prop_assert!(w.is_one_hot_per_block(cfg.k));
        prop_assert_eq!(w.mul_int(&ds.to_int_matrix()).unwrap(), run.trace.stacked());
        let ts = true_system(&run.truth, &ds).unwrap();
        prop_assert!(ts.w_star_true.columns_distinct());
        prop_assert_eq!(ts.multiplicity.iter().sum::<usize>(), ds.n());
        prop_assert_eq!(ts.w_star_true.mul_int(&ts.y_true).unwrap(), run.trace.stacked());
    }

    #[test]
    fn iteration_count_and_convergence((ds, cfg) in config()) {
        let run = kmeans::run(&ds, &cfg).unwrap();
        prop_assert!(run.iterations >= 1 && run.iterations <= cfg.max_iter);
        prop_assert_eq!(run.trace.len(), run.iterations);
        prop_assert_eq!(run.truth.iterations(), run.iterations);
        if run.converged && run.trace.len() >= 2 {
            let s = run.trace.sums();
            prop_assert_eq!(&s[s.len() - 1], &s[s.len() - 2]);
        }
    }

    #[test]
    fn runs_are_deterministic((ds, cfg) in config()) {
        let a = kmeans::run(&ds, &cfg).unwrap();
        let b = kmeans::run(&ds, &cfg).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.truth, b.truth);
    }
}
