use proptest::prelude::*;
use translens_core::attribution::{attribute_all_sequential, hops_are_minimal};
use translens_core::ensemble::{fuse_with_alpha, Normalization};
use translens_core::metrics::PredictionList;
use translens_core::synthgen::{random_corpus, random_sid_map, RandomCorpusSpec};
use translens_core::token_lens::{build_prefix_index, item_pair_observed, max_n_per_instance};
use translens_core::{
    attribute_all, attribute_bruteforce, build_index, make_instances, AttributionConfig, MatchMode, RatioSummary,
    Split, SplitSpec,
};
use translens_core::synthgen::SidSpec;

fn split_of(seed: u64, users: usize, items: usize, max_len: usize, skew: f64) -> Split {
    let ds = random_corpus(&RandomCorpusSpec {
        seed,
        users,
        items,
        min_len: 1,
        max_len,
        skew,
    })
    .unwrap();
    make_instances(&ds, &SplitSpec::leave_last_out()).unwrap()
}

fn corpus() -> impl Strategy<Value = (u64, usize, usize, usize, f64)> {
    (any::<u64>(), 3usize..80, 2usize..25, 3usize..10, 0.0f64..1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn index_matches_bruteforce((seed, users, items, max_len, skew) in corpus(), any_gap in any::<bool>(), max_hop in 1usize..5) {
        let split = split_of(seed, users, items, max_len, skew);
        let cfg = AttributionConfig {
            max_hop,
            train_match_mode: if any_gap { MatchMode::AnyGap } else { MatchMode::Adjacent },
        };
        let index = build_index(&split.train, max_hop).unwrap();
        let fast = attribute_all(&index, &split.test, &cfg).unwrap();
        for (inst, rec) in split.test.iter().zip(&fast.records) {
            prop_assert_eq!(rec, &attribute_bruteforce(&split.train, inst, &cfg));
            prop_assert!(hops_are_minimal(&index, inst, rec, &cfg));
            rec.validate(max_hop).unwrap();
        }
        let seq = attribute_all_sequential(&index, &split.test, &cfg).unwrap();
        prop_assert_eq!(&seq.records, &fast.records);
    }

    #[test]
    fn partition_is_exact((seed, users, items, max_len, skew) in corpus()) {
        let split = split_of(seed, users, items, max_len, skew);
        let cfg = AttributionConfig::default();
        let index = build_index(&split.train, cfg.max_hop).unwrap();
        let recs = attribute_all(&index, &split.test, &cfg).unwrap().records;
        let s = RatioSummary::from_records(&recs, cfg.max_hop);
        prop_assert_eq!(s.memorization + s.generalization + s.uncategorized, s.total);
        if let Some(p) = s.partition_hundredths() {
            prop_assert_eq!(p.iter().sum::<u64>(), 10_000);
        }
    }

    #[test]
    fn full_length_bucket_is_map_invariant((seed, users, items, max_len, skew) in corpus(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let split = split_of(seed, users, items, max_len, skew);
        let sid = SidSpec { len: 3, codebook: 8 };
        let n_items = split.train.num_items();
        let index = build_index(&split.train, 4).unwrap();
        let mut full = Vec::new();
        for s in [s1, s2] {
            let map = random_sid_map(n_items, sid, s).unwrap();
            let pidx = build_prefix_index(&split.train, &map, 3, 4).unwrap();
            let ns = max_n_per_instance(&pidx, &split.test, 4);
            for (inst, &n) in split.test.iter().zip(&ns) {
                for m in 1..=3 {
                    let hit = pidx.prefix_memorizable(inst, m, 4).is_some();
                    prop_assert_eq!(hit, m <= n);
                }
            }
            full.push(ns.iter().map(|&n| n == 3).collect::<Vec<_>>());
        }
        prop_assert_eq!(&full[0], &full[1]);
        for (inst, &f) in split.test.iter().zip(&full[0]) {
            prop_assert_eq!(f, item_pair_observed(&index, inst, 4));
        }
    }

    #[test]
    fn fusion_extremes_follow_one_model(
        id_items in proptest::collection::hash_set(0u32..40, 1..15),
        gr_items in proptest::collection::hash_set(0u32..40, 1..15),
    ) {
        let n = id_items.len() as f64;
        let id: Vec<(u32, f64)> = id_items.iter().enumerate().map(|(r, &i)| (i, (n - r as f64) / (n * n + 1.0))).collect();
        let gr: Vec<(u32, f64)> = gr_items.iter().enumerate().map(|(r, &i)| (i, -(r as f64))).collect();
        let id = PredictionList::new(0, id, true).unwrap();
        let gr = PredictionList::new(0, gr, false).unwrap();
        for norm in [Normalization::Minmax, Normalization::RankReciprocal] {
            let top = |l: &PredictionList| l.items().take(10).collect::<Vec<_>>();
            let all_gr = fuse_with_alpha(&id, &gr, 1.0, norm, None).fused;
            let all_id = fuse_with_alpha(&id, &gr, 0.0, norm, None).fused;
            let k = gr.len().min(10);
            prop_assert_eq!(&top(&all_gr)[..k], &top(&gr)[..k]);
            let k = id.len().min(10);
            prop_assert_eq!(&top(&all_id)[..k], &top(&id)[..k]);
        }
    }
}

#[test]
fn sequential_attribution_runs_under_one_thread() {
    let split = split_of(9, 200, 30, 12, 0.7);
    let cfg = AttributionConfig::default();
    let index = build_index(&split.train, 4).unwrap();
    let a = attribute_all(&index, &split.test, &cfg).unwrap();
    let b = translens_core::par::with_threads(1, || attribute_all(&index, &split.test, &cfg).unwrap());
    assert_eq!(a.records, b.records);
    assert_eq!(a.summary, b.summary);
}
