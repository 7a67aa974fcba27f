mod common;

use std::sync::Arc;

use common::{random_filter, rng, token_dataset};
use fvs_core::optimizer::{fit, refit, ChosenIndex, FitOptions, SelectionResult, WorkloadTally};
use fvs_core::serving::{base_only_cost, exhaustive_cover, greedy_cover, merge_results};
use fvs_core::{
    brute_force_knn, AttributeSet, AttributedDataset, BuildOptions, CostParams, FilterExpr, HnswGraph,
    HnswParams, IndexCollection, Metric, PlanStrategy, SearchResult, SubsumptionMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn f(s: &str) -> FilterExpr {
    FilterExpr::parse(s).unwrap()
}

fn running_example() -> Arc<AttributedDataset<f64>> {
    let rows = ["A,E", "A,D,E", "A,B", "B,D,E", "C,D,E", "E", "D,G", "F"];
    let attrs = rows.iter().map(|r| AttributeSet::parse_line(r).unwrap()).collect();
    let vectors = (0..8).map(|i| vec![i as f64, (i * 3 % 8) as f64]).collect();
    Arc::new(AttributedDataset::from_rows(vectors, attrs, Metric::L2).unwrap())
}

/// A selection naming `filters` directly, sized with the given params.
fn selection<T: fvs_core::Scalar>(ds: &AttributedDataset<T>, filters: &[&str], m_inf: usize) -> SelectionResult<T> {
    let mut chosen = vec![ChosenIndex {
        node: 0,
        filter: FilterExpr::True,
        card: ds.len(),
        m: m_inf,
        size: m_inf * ds.len(),
    }];
    for (i, s) in filters.iter().enumerate() {
        let filter = f(s);
        let card = ds.cardinality(&filter);
        let m = fvs_core::m_downscale(card, ds.len(), m_inf).unwrap();
        chosen.push(ChosenIndex {
            node: i + 1,
            filter,
            card,
            m,
            size: m * card,
        });
    }
    let total_size = chosen.iter().map(|c| c.size).sum();
    SelectionResult {
        chosen,
        total_size,
        steps: Vec::new(),
        collection_cost: T::zero(),
    }
}

fn example_collection(sef_inf: usize) -> IndexCollection<f64> {
    let ds = running_example();
    let p = CostParams::new(10, sef_inf, 1, 165).with_gamma(1.0).with_cor(1.0);
    let sel = selection(&ds, &["A", "A|B|C", "D"], 10);
    IndexCollection::build(ds, &sel, &p, BuildOptions::default()).unwrap()
}

fn key_edges(c: &IndexCollection<f64>) -> Vec<(String, String)> {
    let mut e = Vec::new();
    for (u, cs) in c.hasse().children.iter().enumerate() {
        for &v in cs {
            e.push((c.subindexes()[u].key.clone(), c.subindexes()[v].key.clone()));
        }
    }
    e.sort();
    e
}

#[test]
fn example_hasse_diagram() {
    let c = example_collection(1);
    let want: Vec<(String, String)> = [("*", "A|B|C"), ("*", "D"), ("A|B|C", "A")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(key_edges(&c), want);
    let ds = running_example();
    let p = CostParams::new(10, 1, 1, 80).with_gamma(1.0).with_cor(1.0);
    let base = IndexCollection::build(ds, &selection(&running_example(), &[], 10), &p, BuildOptions::default()).unwrap();
    assert!(base.hasse().children[0].is_empty());
}

#[test]
fn lookup_prunes_non_subsuming_subtrees() {
    let c = example_collection(1);
    let q = f("D&(C|E)");
    let bm = c.dataset().bitmap(&q);
    let (best, visited) = c.find_best_subindex(&q, &bm);
    assert_eq!(c.subindexes()[best].key, "D");
    // Root plus its two children; A under A|B|C is never tested.
    assert_eq!(visited, 3);
    let q = f("G|F");
    let (best, _) = c.find_best_subindex(&q, &c.dataset().bitmap(&q));
    assert_eq!(best, 0);
}

#[test]
fn indexed_versus_brute_force_flip() {
    let q = f("D&(C|E)");
    let c = example_collection(1);
    let bm = c.dataset().bitmap(&q);
    let plan = c.plan(&q, &bm);
    assert_eq!(plan.card_f, 3);
    assert!(matches!(plan.strategy, PlanStrategy::Indexed { sef: 1, .. }));
    assert!((plan.cost - 1.848).abs() < 5e-4);

    let c = example_collection(3);
    let plan = c.plan(&q, &bm);
    assert_eq!(plan.strategy, PlanStrategy::BruteForce);
    assert!((plan.indexed_cost - 3.697).abs() < 5e-4);
    assert_eq!(plan.cost, 3.0);
}

#[test]
fn empty_filter_is_brute_force_with_no_rows() {
    let c = example_collection(1);
    let q = f("Z");
    let (r, plan) = c.serve_with_plan(&[0.0, 0.0], &q, 1).unwrap();
    assert_eq!(plan.strategy, PlanStrategy::BruteForce);
    assert_eq!(plan.card_f, 0);
    assert!(r.is_empty());
}

fn gaussian(n: usize, dim: usize, seed: u64, tokens: bool) -> Arc<AttributedDataset<f32>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f32> = (0..n * dim).map(|_| r.sample(StandardNormal)).collect();
    let attrs = (0..n)
        .map(|_| {
            if tokens {
                AttributeSet::from_tokens(common::TOKENS.iter().copied().filter(|_| r.random_bool(0.35)))
                    .with_numeric("x", r.random_range(0.0..10.0))
            } else {
                AttributeSet::new()
            }
        })
        .collect();
    Arc::new(AttributedDataset::new(dim, v, attrs, Metric::L2).unwrap())
}

fn queries(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| r.sample(StandardNormal)).collect()).collect()
}

#[test]
fn base_only_true_filter_equals_plain_search() {
    let ds = gaussian(2000, 8, 1, false);
    let p = CostParams::new(12, 200, 10, 12 * 2000).with_gamma(1.0);
    let sel = selection(&ds, &[], 12);
    let c = IndexCollection::build(ds.clone(), &sel, &p, BuildOptions::default()).unwrap();
    let g = HnswGraph::build(&ds, &(0..2000).collect::<Vec<_>>(), HnswParams::new(12, 40, fvs_core::serving::derive_seed(0, "*"))).unwrap();
    for q in queries(20, 8, 2) {
        let (r, plan) = c.serve_with_plan(&q, &FilterExpr::True, 10).unwrap();
        assert_eq!(plan.strategy.tag(), "base");
        assert_eq!(r, g.search(&ds, &q, 10, 200).unwrap());
    }
}

#[test]
fn served_batch_recall_and_filter_safety() {
    let ds = gaussian(10_000, 16, 3, true);
    let mut r = rng(4);
    let filters: Vec<FilterExpr> = (0..300).map(|_| random_filter(&mut r, 2, true)).collect();
    let tally = WorkloadTally::from_filters(filters.iter().take(100).cloned());
    let p = CostParams::new(16, 110, 10, 16 * 10_000 * 2);
    let (_, sel) = fit(&tally, &ds, &p, FitOptions::default()).unwrap();
    let c = IndexCollection::build(ds.clone(), &sel, &p, BuildOptions { efc: 64, ..Default::default() }).unwrap();
    let qs = queries(300, 16, 5);
    let mut recall = 0.0;
    for (q, flt) in qs.iter().zip(&filters) {
        let (res, plan) = c.serve_with_plan(q, flt, 10).unwrap();
        assert!(res.ids.iter().all(|&id| flt.evaluate(&ds.attributes()[id])));
        assert!(plan.cost <= base_only_cost(ds.len(), plan.card_f, &p) + 1e-9);
        recall += res.recall_against(&brute_force_knn(&ds, &ds.bitmap(flt), q, 10).ids);
    }
    recall /= qs.len() as f64;
    assert!(recall >= 0.95, "recall {recall}");
}

#[test]
fn lookup_matches_linear_scan() {
    for seed in 0..20 {
        let ds = Arc::new(token_dataset(300, seed));
        let mut r = rng(seed + 1000);
        let members: Vec<String> = (0..r.random_range(1..12)).map(|_| random_filter(&mut r, 2, true).key()).collect();
        let mut uniq: Vec<&str> = Vec::new();
        for m in &members {
            let card = ds.cardinality(&f(m));
            if card > 0 && card < ds.len() && !uniq.contains(&m.as_str()) {
                uniq.push(m);
            }
        }
        let p = CostParams::new(4, 8, 1, usize::MAX).with_gamma(1.0);
        for mode in [SubsumptionMode::Logical, SubsumptionMode::Bitmap] {
            let c = IndexCollection::build(ds.clone(), &selection(&ds, &uniq, 4), &p, BuildOptions { mode, ..Default::default() }).unwrap();
            for _ in 0..200 {
                let q = random_filter(&mut r, 2, true);
                let bm = ds.bitmap(&q);
                let (best, visited) = c.find_best_subindex(&q, &bm);
                assert!(visited <= c.len());
                assert_eq!(best, c.find_best_subindex_linear(&q, &bm), "{mode} {q}");
            }
        }
    }
}

#[test]
fn chain_collection_visits_follow_depth() {
    let attrs: Vec<AttributeSet> = (0..64).map(|i| AttributeSet::new().with_numeric("x", i as f64)).collect();
    let ds = Arc::new(AttributedDataset::from_rows((0..64).map(|i| vec![i as f64]).collect(), attrs, Metric::L2).unwrap());
    let chain: Vec<String> = (1..=6).map(|d| format!("x:[0,{}]", 64 >> d)).collect();
    let siblings: Vec<String> = (1..=5).map(|d| format!("x:[{},64]", 64 - (64 >> d) + 1)).collect();
    let names: Vec<&str> = chain.iter().chain(&siblings).map(String::as_str).collect();
    let p = CostParams::new(4, 4, 1, usize::MAX).with_gamma(1.0);
    let c = IndexCollection::build(ds.clone(), &selection(&ds, &names, 4), &p, BuildOptions::default()).unwrap();
    let q = f("x:[0,0]");
    let (best, visited) = c.find_best_subindex(&q, &ds.bitmap(&q));
    assert_eq!(c.subindexes()[best].key, "x:[0,1]");
    // Each level tests one chain member and at most one sibling.
    assert!(visited <= 1 + 2 * 6, "visited {visited}");
}

#[test]
fn multi_index_on_disjoint_range_cover() {
    let n = 20_000;
    let attrs: Vec<AttributeSet> = (0..n)
        .map(|i| {
            let x = match i {
                i if i < 4000 => 1.0 + (i as f64) / 4000.0 * 1.9,
                i if i < 8000 => 3.0 + ((i - 4000) as f64) / 4000.0 * 2.0,
                i if i < 18_000 => 5.1 + ((i - 8000) as f64) / 10_000.0 * 1.9,
                _ => 8.0,
            };
            AttributeSet::new().with_numeric("x", x)
        })
        .collect();
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let vectors = (0..n).map(|_| (0..4).map(|_| r.sample(StandardNormal)).collect()).collect();
    let ds = Arc::new(AttributedDataset::<f32>::from_rows(vectors, attrs, Metric::L2).unwrap());
    let p = CostParams::new(8, 10, 10, usize::MAX).with_cor(1.0);
    let opts = BuildOptions { multi_index: true, efc: 20, ..Default::default() };
    let q = f("x:[1,5]");
    let bm = ds.bitmap(&q);
    assert_eq!(bm.count(), 8000);

    let c = IndexCollection::build(ds.clone(), &selection(&ds, &["x:[1,3]", "x:[3,5]", "x:[1,7]"], 8), &p, opts).unwrap();
    let plan = c.plan(&q, &bm);
    let PlanStrategy::MultiIndex { parts } = &plan.strategy else { panic!("{plan:?}") };
    let keys: Vec<&str> = parts.iter().map(|(i, _)| c.subindexes()[*i].key.as_str()).collect();
    assert_eq!(keys, ["x:[1,3]", "x:[3,5]"]);
    assert!(plan.cost < plan.indexed_cost && plan.cost < plan.brute_cost);
    let query = queries(1, 4, 10).pop().unwrap();
    let res = c.execute(&query, &bm, &plan, 10).unwrap();
    assert!(res.ids.iter().all(|&id| bm.contains(id)));

    let c = IndexCollection::build(ds.clone(), &selection(&ds, &["x:[1,3]", "x:[3,5]", "x:[1,7]", "x:[1,5]"], 8), &p, opts).unwrap();
    let plan = c.plan(&q, &bm);
    assert!(matches!(plan.strategy, PlanStrategy::Indexed { .. }));
    assert_eq!(c.subindexes()[plan.best_subindex].key, "x:[1,5]");
}

#[test]
fn greedy_cover_close_to_exhaustive() {
    let mut worst: f64 = 1.0;
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = 500;
        let query = fvs_core::Bitmap::from_rows(n, (0..n).filter(|_| r.random_bool(0.3)));
        let sets: Vec<fvs_core::Bitmap> = (0..r.random_range(2..=10))
            .map(|_| {
                let lo = r.random_range(0..n);
                let hi = r.random_range(lo..=n);
                fvs_core::Bitmap::from_rows(n, lo..hi)
            })
            .chain(std::iter::once(fvs_core::Bitmap::ones(n)))
            .collect();
        let keys: Vec<String> = (0..sets.len()).map(|i| format!("s{i:02}")).collect();
        let view: Vec<(&fvs_core::Bitmap, usize, usize, &str)> = sets
            .iter()
            .zip(&keys)
            .filter(|(s, _)| s.count() > 0)
            .map(|(s, k)| (s, s.count(), 10, k.as_str()))
            .collect();
        let g = greedy_cover(&query, &view, 0.5f64).unwrap();
        let e = exhaustive_cover(&query, &view, 0.5f64).unwrap();
        assert!(g.cost + 1e-9 >= e.cost);
        worst = worst.max(g.cost / e.cost.max(1e-12));
    }
    assert!(worst <= 1.5, "worst ratio {worst}");
}

#[test]
fn bundle_round_trip_and_tamper_checks() {
    let ds = gaussian(3000, 8, 6, true);
    let tally = WorkloadTally::from_filters(["A", "A&B", "x:[1,4]", "C|D"].map(f));
    let p = CostParams::new(8, 40, 10, 8 * 3000 * 3).with_gamma(1.0);
    let (_, sel) = fit(&tally, &ds, &p, FitOptions::default()).unwrap();
    let c = IndexCollection::build(ds.clone(), &sel, &p, BuildOptions::default()).unwrap();
    assert!(c.len() > 1);
    let dir = tempfile::tempdir().unwrap();
    c.save(dir.path()).unwrap();
    let back = IndexCollection::load(dir.path(), ds.clone(), None).unwrap();
    assert_eq!(back.len(), c.len());
    for (a, b) in back.subindexes().iter().zip(c.subindexes()) {
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.key, b.key);
    }
    assert_eq!(back.hasse(), c.hasse());
    assert!(IndexCollection::load(dir.path(), ds.clone(), Some(SubsumptionMode::Bitmap)).is_err());

    let other = gaussian(3000, 8, 7, true);
    assert!(IndexCollection::load(dir.path(), other, None).is_err());

    let g = dir.path().join("graphs/0000.hnsw");
    let mut bytes = std::fs::read(&g).unwrap();
    bytes[40] ^= 1;
    std::fs::write(&g, bytes).unwrap();
    assert!(IndexCollection::load(dir.path(), ds, None).is_err());
}

#[test]
fn refit_reuses_unchanged_graphs() {
    let ds = gaussian(3000, 8, 8, true);
    let p = CostParams::new(8, 40, 10, 8 * 3000 * 3).with_gamma(1.0);
    let old_t = WorkloadTally::from_filters(["A", "B"].map(f));
    let (_, sel) = fit(&old_t, &ds, &p, FitOptions::default()).unwrap();
    let c = IndexCollection::build(ds.clone(), &sel, &p, BuildOptions::default()).unwrap();
    let new_t = WorkloadTally::from_filters(["A", "C"].map(f));
    let plan = refit(&sel, &new_t, &ds, &p, FitOptions::default()).unwrap();
    assert_eq!(plan.to_build.iter().map(|c| c.filter.key()).collect::<Vec<_>>(), ["C"]);
    assert_eq!(plan.to_delete.iter().map(|c| c.filter.key()).collect::<Vec<_>>(), ["B"]);
    let c2 = c.apply_refit(&plan).unwrap();
    let a_old = c.subindexes().iter().find(|s| s.key == "A").unwrap();
    let a_new = c2.subindexes().iter().find(|s| s.key == "A").unwrap();
    assert_eq!(a_old.graph, a_new.graph);
    assert!(c2.subindexes().iter().all(|s| s.key != "B"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn merged_results_are_top_k_of_the_union(
        lists in proptest::collection::vec(proptest::collection::vec((0usize..40, 0u32..1000), 0..12), 1..5),
        k in 1usize..15,
    ) {
        // Distance is a function of the id, as it is for one query vector.
        let dist = |id: usize| ((id * 7919) % 1000) as f64 / 10.0;
        let results: Vec<SearchResult<f64>> = lists
            .iter()
            .map(|l| {
                let mut ids: Vec<usize> = l.iter().map(|x| x.0).collect();
                ids.sort_by(|a, b| dist(*a).total_cmp(&dist(*b)).then(a.cmp(b)));
                ids.dedup();
                SearchResult { distances: ids.iter().map(|&i| dist(i)).collect(), ids }
            })
            .collect();
        let merged = merge_results(&results, k);
        let mut all: Vec<usize> = results.iter().flat_map(|r| r.ids.clone()).collect();
        all.sort_by(|a, b| dist(*a).total_cmp(&dist(*b)).then(a.cmp(b)));
        all.dedup();
        all.truncate(k);
        prop_assert_eq!(merged.ids, all);
    }
}
