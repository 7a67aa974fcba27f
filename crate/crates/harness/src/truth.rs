//! Exact filtered top-k, cached on disk by content hash.

use std::fs;
use std::path::{Path, PathBuf};

use fvs_core::{brute_force_knn, AttributedDataset, Error, FilterExpr, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Hash of the dataset, queries, filters and `k` this was computed from.
    pub key: String,
    pub k: usize,
    pub ids: Vec<Vec<usize>>,
}

impl GroundTruth {
    /// Mean over queries of the fraction of true neighbors returned.
    pub fn mean_recall(&self, results: &[Vec<usize>]) -> f64 {
        if self.ids.is_empty() {
            return 1.0;
        }
        let total: f64 = self
            .ids
            .iter()
            .zip(results)
            .map(|(t, r)| {
                if t.is_empty() {
                    1.0
                } else {
                    t.iter().filter(|id| r.contains(id)).count() as f64 / t.len() as f64
                }
            })
            .sum();
        total / self.ids.len() as f64
    }
}

pub fn truth_key(ds: &AttributedDataset<f32>, queries: &[Vec<f32>], filters: &[FilterExpr], k: usize) -> String {
    let mut h = Sha256::new();
    h.update(ds.content_hash().as_bytes());
    h.update((k as u64).to_le_bytes());
    h.update((queries.len() as u64).to_le_bytes());
    for (q, f) in queries.iter().zip(filters) {
        for v in q {
            h.update(v.to_le_bytes());
        }
        h.update(f.key().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn ground_truth(ds: &AttributedDataset<f32>, queries: &[Vec<f32>], filters: &[FilterExpr], k: usize) -> Result<GroundTruth> {
    if queries.len() != filters.len() {
        return Err(Error::Config(format!("{} queries but {} filters", queries.len(), filters.len())));
    }
    let ids = queries
        .par_iter()
        .zip(filters)
        .map(|(q, f)| brute_force_knn(ds, &ds.bitmap(f), q, k).ids)
        .collect();
    Ok(GroundTruth {
        key: truth_key(ds, queries, filters, k),
        k,
        ids,
    })
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("truth-{}.json", &key[..16]))
}

/// Reads a cached answer whose stored key matches, or computes and stores a
/// fresh one. The flag is true on a cache hit.
pub fn ground_truth_cached(
    dir: &Path,
    ds: &AttributedDataset<f32>,
    queries: &[Vec<f32>],
    filters: &[FilterExpr],
    k: usize,
) -> Result<(GroundTruth, bool)> {
    let key = truth_key(ds, queries, filters, k);
    let path = cache_path(dir, &key);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(gt) = serde_json::from_str::<GroundTruth>(&text) {
            if gt.key == key && gt.k == k && gt.ids.len() == queries.len() {
                return Ok((gt, true));
            }
        }
    }
    let gt = ground_truth(ds, queries, filters, k)?;
    fs::create_dir_all(dir)?;
    fs::write(&path, serde_json::to_vec(&gt)?)?;
    Ok((gt, false))
}
