#![allow(dead_code)]

use fvs_core::{AttributeSet, AttributedDataset, FilterExpr, Metric};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOKENS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rows with independent tokens (token `i` with probability `1/(i+1)`) and
/// a numeric attribute `x` uniform in `[0, 10)` on most rows.
pub fn token_dataset(n: usize, seed: u64) -> AttributedDataset<f64> {
    let mut r = rng(seed);
    let attrs = (0..n)
        .map(|_| {
            let mut a = AttributeSet::from_tokens(
                TOKENS
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| r.random_bool(1.0 / (*i as f64 + 1.5)))
                    .map(|(_, t)| *t),
            );
            if r.random_bool(0.9) {
                a = a.with_numeric("x", (r.random_range(0.0..10.0f64) * 4.0).round() / 4.0);
            }
            a
        })
        .collect();
    let vectors = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
    AttributedDataset::from_rows(vectors, attrs, Metric::L2).unwrap()
}

/// Random negation-free filter over [`TOKENS`], with ranges on `x` when
/// `ranges` is set.
pub fn random_filter(r: &mut impl Rng, depth: usize, ranges: bool) -> FilterExpr {
    let leaf = depth == 0 || r.random_bool(0.4);
    if leaf {
        if ranges && r.random_bool(0.3) {
            let a = r.random_range(0..10) as f64;
            let b = a + r.random_range(0..6) as f64;
            let lo = r.random_bool(0.85).then_some(a);
            let hi = r.random_bool(0.85).then_some(b);
            return FilterExpr::range("x", lo, hi).unwrap();
        }
        return FilterExpr::attr(*TOKENS.choose(r).unwrap());
    }
    let n = r.random_range(2..=3);
    let kids: Vec<FilterExpr> = (0..n).map(|_| random_filter(r, depth - 1, ranges)).collect();
    if r.random_bool(0.5) {
        FilterExpr::and(kids)
    } else {
        FilterExpr::or(kids)
    }
}

/// Every token subset, as an oracle universe for token-only filters.
pub fn all_token_sets() -> Vec<AttributeSet> {
    (0u32..1 << TOKENS.len())
        .map(|m| {
            AttributeSet::from_tokens(
                TOKENS.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, t)| *t),
            )
        })
        .collect()
}
