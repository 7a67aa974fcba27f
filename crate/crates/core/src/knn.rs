use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::AttributedDataset;
use crate::predicate::Bitmap;
use crate::scalar::Scalar;

/// Top-k answer: dataset row ids with matching distances, closest first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchResult<T> {
    pub ids: Vec<usize>,
    pub distances: Vec<T>,
}

impl<T: Scalar> SearchResult<T> {
    pub fn empty() -> Self {
        Self {
            ids: Vec::new(),
            distances: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub(crate) fn from_pairs(mut pairs: Vec<(T, usize)>, k: usize) -> Self {
        pairs.sort_by(|a, b| cmp_dist(a.0, b.0).then(a.1.cmp(&b.1)));
        pairs.truncate(k);
        let (distances, ids) = pairs.into_iter().unzip();
        Self { ids, distances }
    }

    /// Fraction of `truth` ids present in `self`. An empty truth counts as
    /// fully recalled.
    pub fn recall_against(&self, truth: &[usize]) -> f64 {
        if truth.is_empty() {
            return 1.0;
        }
        let hits = truth.iter().filter(|id| self.ids.contains(id)).count();
        hits as f64 / truth.len() as f64
    }
}

#[inline]
pub(crate) fn cmp_dist<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Heap entry ordered by distance, then id.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Scored<T> {
    pub dist: T,
    pub id: u32,
}

impl<T: Scalar> PartialEq for Scored<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Scored<T> {}

impl<T: Scalar> PartialOrd for Scored<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Scored<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_dist(self.dist, other.dist).then(self.id.cmp(&other.id))
    }
}

/// Exact top-k among rows whose bit is set; returns all passing rows when
/// fewer than `k` pass.
pub fn brute_force_knn<T: Scalar>(
    ds: &AttributedDataset<T>,
    bm: &Bitmap,
    q: &[T],
    k: usize,
) -> SearchResult<T> {
    if k == 0 {
        return SearchResult::empty();
    }
    let mut heap: BinaryHeap<Scored<T>> = BinaryHeap::with_capacity(k + 1);
    for row in bm.iter() {
        let d = ds.distance(q, row);
        let cand = Scored {
            dist: d,
            id: row as u32,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
    }
    let pairs = heap.into_iter().map(|s| (s.dist, s.id as usize)).collect();
    SearchResult::from_pairs(pairs, k)
}
