//! The eight-row running example: dataset, tally and expected selection.

use fvs_core::optimizer::{build_candidate_dag, greedy_ratio, marginal_benefit, DagOptions, WorkloadTally};
use fvs_core::{
    query_cost, subsumes_logical, AttributeSet, AttributedDataset, CostParams, FilterExpr, Metric,
    Strategy,
};

fn f(s: &str) -> FilterExpr {
    FilterExpr::parse(s).unwrap()
}

fn dataset() -> AttributedDataset<f64> {
    let rows = ["A,E", "A,D,E", "A,B", "B,D,E", "C,D,E", "E", "D,G", "F"];
    let attrs: Vec<AttributeSet> = rows.iter().map(|r| AttributeSet::parse_line(r).unwrap()).collect();
    let vectors = (0..8).map(|i| vec![i as f64, (i * 3 % 8) as f64]).collect();
    AttributedDataset::from_rows(vectors, attrs, Metric::L2).unwrap()
}

/// Counts solved so that the expected unit benefits come out.
fn tally() -> WorkloadTally {
    WorkloadTally::from_counts(
        [
            ("A", 2),
            ("D", 1),
            ("A|B", 1),
            ("D&E", 1),
            ("D&(A|B|G)", 1),
            ("D&(B|C|G)", 1),
            ("A|B|C", 2),
            ("A|C", 1),
            ("B|C", 1),
            ("(A|B)&E", 1),
            ("(A&E)|C", 1),
        ]
        .map(|(s, c)| (f(s), c)),
    )
}

fn params() -> CostParams<f64> {
    CostParams::new(10, 10, 1, 165).with_gamma(1.0).with_cor(1.0)
}

#[test]
fn cardinalities() {
    let ds = dataset();
    for (s, c) in [("A", 3), ("D", 4), ("A|B", 4), ("A|B|C", 5), ("F", 1), ("D&(C|E)", 3), ("D&E", 3)] {
        assert_eq!(ds.cardinality(&f(s)), c, "{s}");
    }
}

#[test]
fn logical_subsumption_agrees_with_truth_table() {
    let filters: Vec<FilterExpr> = tally().entries().iter().map(|e| e.0.clone()).collect();
    // Every token combination over the eight letters, as an oracle for "all attribute sets".
    let letters = ["A", "B", "C", "D", "E", "F", "G", "H"];
    let sets: Vec<AttributeSet> = (0u32..256)
        .map(|mask| AttributeSet::from_tokens(letters.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, l)| *l)))
        .collect();
    for outer in &filters {
        for inner in &filters {
            let truth = sets.iter().all(|a| !inner.evaluate(a) || outer.evaluate(a));
            assert_eq!(subsumes_logical(outer, inner), truth, "{outer} vs {inner}");
        }
    }
}

#[test]
fn selection_matches_printed_steps() {
    let ds = dataset();
    let p = params();
    let dag = build_candidate_dag(&tally(), &ds, &p, DagOptions::default()).unwrap();
    assert!(dag.edge_keys().contains(&("A|B".into(), "A".into())));
    let sel = greedy_ratio(&dag, &p).unwrap();
    let picked: Vec<String> = sel.steps.iter().map(|s| s.filter.key()).collect();
    assert_eq!(picked, ["A", "D", "A|B|C"]);
    for (s, want) in sel.steps.iter().zip([0.253, 0.217, 0.209]) {
        assert!((s.unit_benefit - want).abs() <= 0.005, "{} {}", s.filter, s.unit_benefit);
    }
    assert_eq!(sel.total_size, 163);
    assert_eq!(sel.chosen_keys(), ["*", "A", "D", "A|B|C"]);
}

#[test]
fn marginal_benefit_examples() {
    let ds = dataset();
    let p = params();
    let only_a = WorkloadTally::from_counts([(f("A"), 1)]);
    let dag = build_candidate_dag(&only_a, &ds, &p, DagOptions::default()).unwrap();
    let a = dag.find(&f("A")).unwrap();
    let b: f64 = marginal_benefit(&dag, &[], a, &p).unwrap();
    assert!((b - (3.0 - 3f64.ln())).abs() < 1e-9);
    assert!((b - 1.901).abs() < 5e-4);

    // A|B joins as a candidate; its own query gains nothing from A's subindex.
    let t = WorkloadTally::from_counts([(f("A"), 1), (f("A|B"), 1)]);
    let dag = build_candidate_dag(&t, &ds, &p, DagOptions::default()).unwrap();
    let (a, ab) = (dag.find(&f("A")).unwrap(), dag.find(&f("A|B")).unwrap());
    let b: f64 = marginal_benefit(&dag, &[ab], a, &p).unwrap();
    assert!((b - (4.0 * 4f64.ln() / 3.0 - 3f64.ln())).abs() < 1e-9);
    assert!((b - 0.75).abs() < 5e-3);
}

#[test]
fn collection_query_costs() {
    let ds = dataset();
    let p = params();
    let members: Vec<(FilterExpr, usize)> = ["*", "A", "D", "A|B|C"].iter().map(|s| (f(s), ds.cardinality(&f(s)))).collect();
    let refs: Vec<(&FilterExpr, usize)> = members.iter().map(|(a, b)| (a, *b)).collect();
    let qa = query_cost(&refs, &f("A"), 3, &p, subsumes_logical);
    assert_eq!(qa.strategy, Strategy::Indexed(1));
    assert!((qa.cost - 3f64.ln()).abs() < 1e-12);
    let qf = query_cost(&refs, &f("F"), 1, &p, subsumes_logical);
    assert_eq!(qf.strategy, Strategy::BruteForce);
    assert_eq!(qf.cost, 1.0);
}
