//! Hierarchical small-world graph over a subset of dataset rows.
//!
//! Nodes are numbered locally in insertion order; `row_ids` maps them back
//! to dataset rows. Vectors are never copied into the graph, every
//! operation takes the owning [`AttributedDataset`].

mod snapshot;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::knn::{Scored, SearchResult};
use crate::predicate::Bitmap;
use crate::scalar::Scalar;

pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

const MAX_LEVEL: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HnswParams {
    /// Out-degree cap on upper layers; the base layer allows `2 * m`.
    pub m: usize,
    /// Candidate list size while inserting.
    pub efc: usize,
    pub seed: u64,
}

impl HnswParams {
    pub fn new(m: usize, efc: usize, seed: u64) -> Self {
        Self { m, efc, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HnswGraph {
    params: HnswParams,
    row_ids: Vec<u32>,
    /// `links[node][layer]`, present for layers `0..=level(node)`.
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    max_level: usize,
    /// Base-layer lists packed contiguously for search: node `i` owns
    /// `base_links[base_offsets[i]..base_offsets[i + 1]]`. Empty while
    /// building.
    base_offsets: Vec<u32>,
    base_links: Vec<u32>,
}

/// Per-search counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub distance_computations: usize,
    pub visited: usize,
}

struct Visited {
    words: Vec<u64>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    /// Marks `i`; returns false if it was already marked.
    #[inline]
    fn mark(&mut self, i: u32) -> bool {
        let (w, b) = ((i >> 6) as usize, 1u64 << (i & 63));
        let fresh = self.words[w] & b == 0;
        self.words[w] |= b;
        fresh
    }
}

impl HnswGraph {
    /// Inserts `rows` in the given order.
    pub fn build<T: Scalar>(
        ds: &AttributedDataset<T>,
        rows: &[usize],
        params: HnswParams,
    ) -> Result<Self> {
        if params.m < 2 {
            return Err(Error::Param(format!("M must be at least 2, got {}", params.m)));
        }
        if params.efc < 1 {
            return Err(Error::Param("efc must be at least 1".into()));
        }
        if rows.is_empty() {
            return Err(Error::EmptySubindex("cannot build a graph over zero rows".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= ds.len()) {
            return Err(Error::Dataset(format!("row {bad} out of range for {} rows", ds.len())));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let ml = 1.0 / (params.m as f64).ln();
        let mut g = HnswGraph {
            params,
            row_ids: rows.iter().map(|&r| r as u32).collect(),
            links: Vec::with_capacity(rows.len()),
            entry: 0,
            max_level: 0,
            base_offsets: Vec::new(),
            base_links: Vec::new(),
        };
        for node in 0..rows.len() {
            let u: f64 = 1.0 - rng.random::<f64>();
            let level = ((-u.ln() * ml).floor() as usize).min(MAX_LEVEL);
            g.insert(ds, node as u32, level);
        }
        g.pack_base_layer();
        Ok(g)
    }

    fn pack_base_layer(&mut self) {
        let mut offsets = Vec::with_capacity(self.links.len() + 1);
        let mut flat = Vec::with_capacity(self.links.iter().map(|l| l[0].len()).sum());
        offsets.push(0u32);
        for layers in &self.links {
            flat.extend_from_slice(&layers[0]);
            offsets.push(flat.len() as u32);
        }
        self.base_offsets = offsets;
        self.base_links = flat;
    }

    #[inline]
    fn out(&self, node: u32, layer: usize) -> &[u32] {
        if layer == 0 && !self.base_offsets.is_empty() {
            let i = node as usize;
            &self.base_links[self.base_offsets[i] as usize..self.base_offsets[i + 1] as usize]
        } else {
            &self.links[node as usize][layer]
        }
    }

    fn cap(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    #[inline]
    fn vec_of<'a, T: Scalar>(&self, ds: &'a AttributedDataset<T>, node: u32) -> &'a [T] {
        ds.vector(self.row_ids[node as usize] as usize)
    }

    #[inline]
    fn dist<T: Scalar>(&self, ds: &AttributedDataset<T>, q: &[T], node: u32) -> T {
        ds.metric().distance(q, self.vec_of(ds, node))
    }

    fn insert<T: Scalar>(&mut self, ds: &AttributedDataset<T>, node: u32, level: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }
        let q = self.vec_of(ds, node);
        let mut ep = Scored {
            dist: self.dist(ds, q, self.entry),
            id: self.entry,
        };
        let mut stats = SearchStats::default();
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy_closest(ds, q, ep, layer, &mut stats);
        }
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(ds, q, &[ep], self.params.efc, layer, |_| true, &mut stats);
            let chosen: Vec<u32> = found.iter().take(self.params.m).map(|s| s.id).collect();
            for &nb in &chosen {
                self.link(ds, nb, node, layer);
            }
            self.links[node as usize][layer] = chosen;
            ep = found[0];
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = node;
        }
    }

    /// Adds `to` to `from`'s list, keeping the closest `cap` when over.
    fn link<T: Scalar>(&mut self, ds: &AttributedDataset<T>, from: u32, to: u32, layer: usize) {
        let cap = self.cap(layer);
        let list = &mut self.links[from as usize][layer];
        list.push(to);
        if list.len() <= cap {
            return;
        }
        let base = ds.vector(self.row_ids[from as usize] as usize);
        let mut scored: Vec<Scored<T>> = list
            .iter()
            .map(|&id| Scored {
                dist: ds
                    .metric()
                    .distance(base, ds.vector(self.row_ids[id as usize] as usize)),
                id,
            })
            .collect();
        scored.sort();
        scored.truncate(cap);
        *list = scored.into_iter().map(|s| s.id).collect();
    }

    fn greedy_closest<T: Scalar>(
        &self,
        ds: &AttributedDataset<T>,
        q: &[T],
        mut cur: Scored<T>,
        layer: usize,
        stats: &mut SearchStats,
    ) -> Scored<T> {
        loop {
            let mut changed = false;
            for &nb in &self.links[cur.id as usize][layer] {
                let cand = Scored {
                    dist: self.dist(ds, q, nb),
                    id: nb,
                };
                stats.distance_computations += 1;
                if cand < cur {
                    cur = cand;
                    changed = true;
                }
            }
            if !changed {
                return cur;
            }
        }
    }

    /// Beam search on one layer. Every reached node is a candidate for
    /// expansion; only nodes passing `admit` enter the result list.
    /// Returns admitted nodes sorted by distance.
    #[allow(clippy::too_many_arguments)]
    fn search_layer<T: Scalar>(
        &self,
        ds: &AttributedDataset<T>,
        q: &[T],
        entry_points: &[Scored<T>],
        ef: usize,
        layer: usize,
        admit: impl Fn(u32) -> bool,
        stats: &mut SearchStats,
    ) -> Vec<Scored<T>> {
        let mut visited = Visited::new(self.row_ids.len());
        let mut candidates: BinaryHeap<Reverse<Scored<T>>> = BinaryHeap::new();
        let mut top: BinaryHeap<Scored<T>> = BinaryHeap::with_capacity(ef + 1);
        let mut bound = T::infinity();
        for &ep in entry_points {
            if !visited.mark(ep.id) {
                continue;
            }
            stats.visited += 1;
            candidates.push(Reverse(ep));
            if admit(ep.id) {
                top.push(ep);
                if top.len() > ef {
                    top.pop();
                }
                bound = top.peek().unwrap().dist;
            }
        }
        while let Some(Reverse(cur)) = candidates.pop() {
            if cur.dist > bound && top.len() >= ef {
                break;
            }
            for &nb in self.out(cur.id, layer) {
                if !visited.mark(nb) {
                    continue;
                }
                stats.visited += 1;
                stats.distance_computations += 1;
                let d = self.dist(ds, q, nb);
                if top.len() < ef || d < bound {
                    let s = Scored { dist: d, id: nb };
                    candidates.push(Reverse(s));
                    if admit(nb) {
                        top.push(s);
                        if top.len() > ef {
                            top.pop();
                        }
                    }
                    if let Some(w) = top.peek() {
                        bound = w.dist;
                    }
                }
            }
        }
        top.into_sorted_vec()
    }

    /// Filtered top-k with result-set filtering: upper layers are descended
    /// greedily ignoring the filter; on the base layer a candidate list of
    /// size `sef` is explored and a node enters the results only if its
    /// dataset row is set in `bm`.
    pub fn search_filtered<T: Scalar>(
        &self,
        ds: &AttributedDataset<T>,
        q: &[T],
        k: usize,
        sef: usize,
        bm: &Bitmap,
    ) -> Result<SearchResult<T>> {
        self.search_filtered_with_stats(ds, q, k, sef, bm)
            .map(|(r, _)| r)
    }

    pub fn search_filtered_with_stats<T: Scalar>(
        &self,
        ds: &AttributedDataset<T>,
        q: &[T],
        k: usize,
        sef: usize,
        bm: &Bitmap,
    ) -> Result<(SearchResult<T>, SearchStats)> {
        if k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if sef < k {
            return Err(Error::Param(format!("sef {sef} is below k {k}")));
        }
        if bm.len() != ds.len() {
            return Err(Error::BitmapLength {
                left: bm.len(),
                right: ds.len(),
            });
        }
        let mut stats = SearchStats::default();
        let mut ep = Scored {
            dist: self.dist(ds, q, self.entry),
            id: self.entry,
        };
        stats.distance_computations += 1;
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy_closest(ds, q, ep, layer, &mut stats);
        }
        let rows = &self.row_ids;
        let found = self.search_layer(
            ds,
            q,
            &[ep],
            sef,
            0,
            |n| bm.contains(rows[n as usize] as usize),
            &mut stats,
        );
        let pairs = found
            .into_iter()
            .map(|s| (s.dist, self.row_ids[s.id as usize] as usize))
            .collect();
        Ok((SearchResult::from_pairs(pairs, k), stats))
    }

    /// Unfiltered search over the graph's own rows.
    pub fn search<T: Scalar>(
        &self,
        ds: &AttributedDataset<T>,
        q: &[T],
        k: usize,
        sef: usize,
    ) -> Result<SearchResult<T>> {
        self.search_filtered(ds, q, k, sef, &Bitmap::ones(ds.len()))
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn row_ids(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.row_ids.iter().map(|&r| r as usize)
    }

    pub fn entry_point(&self) -> usize {
        self.entry as usize
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn level(&self, node: usize) -> usize {
        self.links[node].len() - 1
    }

    /// Local neighbor ids of `node` on `layer`.
    pub fn neighbors(&self, node: usize, layer: usize) -> &[u32] {
        self.links[node].get(layer).map_or(&[], Vec::as_slice)
    }

    pub fn degree_cap(&self, layer: usize) -> usize {
        self.cap(layer)
    }

    /// Size in the optimizer's abstract units: `M * indexed rows`.
    pub fn model_size(&self) -> usize {
        self.params.m * self.row_ids.len()
    }

    /// Approximate heap bytes of the graph structure, for diagnostics only.
    pub fn actual_bytes(&self) -> usize {
        let link_bytes: usize = self
            .links
            .iter()
            .map(|layers| {
                layers.iter().map(|l| l.capacity() * 4 + 24).sum::<usize>() + 24
            })
            .sum();
        link_bytes + (self.row_ids.capacity() + self.base_offsets.capacity() + self.base_links.capacity()) * 4
    }
}
