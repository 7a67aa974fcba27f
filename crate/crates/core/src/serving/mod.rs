//! Query-time side: a built collection, best-subindex lookup, plan choice
//! and execution.

mod bundle;
mod multi;

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use bundle::{BundleInfo, BUNDLE_FORMAT, BUNDLE_VERSION};
pub use multi::{exhaustive_cover, greedy_cover, CoverChoice};

use crate::costmodel::{brute_cost, indexed_cost, sef_downscale, CostParams};
use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::hnsw::{HnswGraph, HnswParams};
use crate::knn::{brute_force_knn, SearchResult};
use crate::optimizer::{ChosenIndex, RefitPlan, SelectionResult};
use crate::order::{parents_of, transitive_reduction};
use crate::predicate::{subsumes_bitmap, subsumes_logical, Bitmap, FilterExpr, LogicalTest, SubsumptionMode};
use crate::scalar::Scalar;

/// Graph construction settings shared by every subindex of a collection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    pub efc: usize,
    pub seed: u64,
    pub mode: SubsumptionMode,
    /// Consider unions of subindexes when planning.
    pub multi_index: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            efc: 40,
            seed: 0,
            mode: SubsumptionMode::Logical,
            multi_index: false,
        }
    }
}

/// A graph over exactly the rows satisfying `filter`.
#[derive(Clone, Debug)]
pub struct Subindex {
    pub filter: FilterExpr,
    pub key: String,
    pub card: usize,
    pub m: usize,
    pub graph: HnswGraph,
    pub rows: Bitmap,
}

impl Subindex {
    pub fn model_size(&self) -> usize {
        self.graph.model_size()
    }
}

/// Seed for one subindex, stable across rebuilds of the same filter.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Hasse diagram over collection members; node 0 is the base index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hasse {
    pub children: Vec<Vec<usize>>,
    pub parents: Vec<Vec<usize>>,
}

/// Transitive reduction of subsumption among `members`, which must be
/// sorted by descending cardinality then key with the base first.
pub fn build_hasse(members: &[(&FilterExpr, usize)], subsumes: impl Fn(usize, usize) -> bool + Sync) -> Hasse {
    debug_assert!(members.windows(2).all(|w| w[0].1 >= w[1].1));
    let children = transitive_reduction(members.len(), |u, v| u == 0 || subsumes(u, v));
    let parents = parents_of(&children);
    Hasse { children, parents }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanStrategy {
    Indexed { subindex: usize, sef: usize },
    BruteForce,
    MultiIndex { parts: Vec<(usize, usize)> },
}

impl PlanStrategy {
    pub fn tag(&self) -> &'static str {
        match self {
            PlanStrategy::Indexed { subindex: 0, .. } => "base",
            PlanStrategy::Indexed { .. } => "indexed",
            PlanStrategy::BruteForce => "brute",
            PlanStrategy::MultiIndex { .. } => "multi",
        }
    }
}

/// Chosen strategy plus the modeled figures it was picked from.
#[derive(Clone, Debug, PartialEq)]
pub struct ServingPlan<T> {
    pub strategy: PlanStrategy,
    pub cost: T,
    pub card_f: usize,
    pub brute_cost: T,
    /// Cost of searching the best single subsumer; infinite when `card_f` is 0.
    pub indexed_cost: T,
    pub best_subindex: usize,
    pub multi_cost: Option<T>,
    /// Hasse nodes whose filter was tested during lookup.
    pub visited: usize,
}

/// Base index plus selected subindexes over a shared dataset.
#[derive(Clone, Debug)]
pub struct IndexCollection<T: Scalar> {
    ds: Arc<AttributedDataset<T>>,
    params: CostParams<T>,
    opts: BuildOptions,
    subindexes: Vec<Subindex>,
    hasse: Hasse,
    selection: SelectionResult<T>,
}

fn sort_members(chosen: &mut [ChosenIndex]) {
    chosen.sort_by(|a, b| {
        b.filter
            .is_true()
            .cmp(&a.filter.is_true())
            .then(b.card.cmp(&a.card))
            .then_with(|| a.filter.key().cmp(&b.filter.key()))
    });
}

impl<T: Scalar> IndexCollection<T> {
    /// Builds one graph per chosen filter, in parallel.
    pub fn build(
        ds: Arc<AttributedDataset<T>>,
        selection: &SelectionResult<T>,
        params: &CostParams<T>,
        opts: BuildOptions,
    ) -> Result<Self> {
        Self::build_reusing(ds, selection, params, opts, &[])
    }

    fn build_reusing(
        ds: Arc<AttributedDataset<T>>,
        selection: &SelectionResult<T>,
        params: &CostParams<T>,
        opts: BuildOptions,
        existing: &[Subindex],
    ) -> Result<Self> {
        params.validate_shape()?;
        let mut chosen = selection.chosen.clone();
        if !chosen.first().is_some_and(|c| c.filter.is_true()) {
            return Err(Error::Param("selection does not start with the base index".into()));
        }
        sort_members(&mut chosen);
        let subindexes: Vec<Subindex> = chosen
            .par_iter()
            .map(|c| {
                let key = c.filter.key();
                if let Some(s) = existing.iter().find(|s| s.key == key && s.m == c.m) {
                    return Ok(s.clone());
                }
                let rows = ds.bitmap(&c.filter);
                if rows.count() != c.card {
                    return Err(Error::Param(format!(
                        "filter {key} has {} rows, selection says {}",
                        rows.count(),
                        c.card
                    )));
                }
                let ids = rows.to_vec();
                let graph = HnswGraph::build(&ds, &ids, HnswParams::new(c.m, opts.efc, derive_seed(opts.seed, &key)))?;
                Ok(Subindex {
                    filter: c.filter.clone(),
                    key,
                    card: c.card,
                    m: c.m,
                    graph,
                    rows,
                })
            })
            .collect::<Result<_>>()?;
        Self::assemble(ds, params, opts, subindexes, selection.clone())
    }

    fn assemble(
        ds: Arc<AttributedDataset<T>>,
        params: &CostParams<T>,
        opts: BuildOptions,
        subindexes: Vec<Subindex>,
        selection: SelectionResult<T>,
    ) -> Result<Self> {
        let members: Vec<(&FilterExpr, usize)> = subindexes.iter().map(|s| (&s.filter, s.card)).collect();
        let hasse = match opts.mode {
            SubsumptionMode::Logical => build_hasse(&members, |u, v| {
                subsumes_logical(&subindexes[u].filter, &subindexes[v].filter)
            }),
            SubsumptionMode::Bitmap => build_hasse(&members, |u, v| {
                subsumes_bitmap(&subindexes[u].rows, &subindexes[v].rows).unwrap_or(false)
            }),
        };
        Ok(Self {
            ds,
            params: *params,
            opts,
            subindexes,
            hasse,
            selection,
        })
    }

    /// New collection for a refit, keeping graphs whose filter and degree are
    /// unchanged.
    pub fn apply_refit(&self, plan: &RefitPlan<T>) -> Result<Self> {
        Self::build_reusing(self.ds.clone(), &plan.selection, &self.params, self.opts, &self.subindexes)
    }

    pub fn dataset(&self) -> &Arc<AttributedDataset<T>> {
        &self.ds
    }

    pub fn params(&self) -> &CostParams<T> {
        &self.params
    }

    /// Copy with a different serving exploration factor.
    pub fn with_sef_inf(&self, sef_inf: usize) -> Result<Self> {
        let mut c = self.clone();
        c.params.sef_inf = sef_inf;
        c.params.validate_shape()?;
        Ok(c)
    }

    pub fn with_multi_index(&self, on: bool) -> Self {
        let mut c = self.clone();
        c.opts.multi_index = on;
        c
    }

    pub fn options(&self) -> BuildOptions {
        self.opts
    }

    pub fn mode(&self) -> SubsumptionMode {
        self.opts.mode
    }

    pub fn subindexes(&self) -> &[Subindex] {
        &self.subindexes
    }

    pub fn hasse(&self) -> &Hasse {
        &self.hasse
    }

    pub fn selection(&self) -> &SelectionResult<T> {
        &self.selection
    }

    pub fn len(&self) -> usize {
        self.subindexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subindexes.is_empty()
    }

    pub fn model_size(&self) -> usize {
        self.subindexes.iter().map(Subindex::model_size).sum()
    }

    pub fn actual_bytes(&self) -> usize {
        self.subindexes
            .iter()
            .map(|s| s.graph.actual_bytes() + s.rows.len().div_ceil(8))
            .sum()
    }

    fn member_subsumes(&self, i: usize, test: &LogicalTest, bm: &Bitmap) -> bool {
        if i == 0 {
            return true;
        }
        let s = &self.subindexes[i];
        // Logical subsumption implies row containment, so a failed superset
        // test settles both modes.
        if !subsumes_bitmap(&s.rows, bm).unwrap_or(false) {
            return false;
        }
        match self.opts.mode {
            SubsumptionMode::Logical => test.subsumed_by(&s.filter),
            SubsumptionMode::Bitmap => true,
        }
    }

    /// Breadth-first search from the base that only enters members whose
    /// filter subsumes `f`, returning the smallest such member (ties by key)
    /// and the number of members tested.
    pub fn find_best_subindex(&self, f: &FilterExpr, bm: &Bitmap) -> (usize, usize) {
        let n = self.subindexes.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        let mut best = 0usize;
        let test = LogicalTest::new(f);
        while let Some(u) = queue.pop_front() {
            let (bu, su) = (&self.subindexes[best], &self.subindexes[u]);
            if (su.card, &su.key) < (bu.card, &bu.key) {
                best = u;
            }
            for &c in &self.hasse.children[u] {
                if seen[c] {
                    continue;
                }
                seen[c] = true;
                visited += 1;
                if self.member_subsumes(c, &test, bm) {
                    queue.push_back(c);
                }
            }
        }
        (best, visited)
    }

    /// Linear-scan equivalent of [`Self::find_best_subindex`].
    pub fn find_best_subindex_linear(&self, f: &FilterExpr, bm: &Bitmap) -> usize {
        let test = LogicalTest::new(f);
        (0..self.subindexes.len())
            .filter(|&i| self.member_subsumes(i, &test, bm))
            .min_by(|&a, &b| {
                let (sa, sb) = (&self.subindexes[a], &self.subindexes[b]);
                (sa.card, &sa.key).cmp(&(sb.card, &sb.key))
            })
            .unwrap_or(0)
    }

    /// Serving exploration factor for member `i`.
    pub fn sef_for(&self, i: usize, k: usize) -> usize {
        let s = &self.subindexes[i];
        let k = k.max(self.params.k);
        sef_downscale(s.card, self.ds.len(), self.params.sef_inf.max(k), k).unwrap_or(k)
    }

    pub fn plan(&self, f: &FilterExpr, bm: &Bitmap) -> ServingPlan<T> {
        self.plan_k(f, bm, self.params.k)
    }

    fn plan_k(&self, f: &FilterExpr, bm: &Bitmap, k: usize) -> ServingPlan<T> {
        let card_f = bm.count();
        let brute: T = brute_cost(card_f, self.params.gamma);
        let (best, visited) = self.find_best_subindex(f, bm);
        let mut plan = ServingPlan {
            strategy: PlanStrategy::BruteForce,
            cost: brute,
            card_f,
            brute_cost: brute,
            indexed_cost: T::infinity(),
            best_subindex: best,
            multi_cost: None,
            visited,
        };
        if card_f == 0 {
            return plan;
        }
        let sef = self.sef_for(best, k);
        let idx = indexed_cost(self.subindexes[best].card, card_f, sef, self.params.cor);
        plan.indexed_cost = idx;
        if idx < brute {
            plan.strategy = PlanStrategy::Indexed { subindex: best, sef };
            plan.cost = idx;
        }
        if self.opts.multi_index {
            if let Some(cover) = self.multi_index_plan_k(bm, k) {
                plan.multi_cost = Some(cover.cost);
                if cover.cost < plan.cost {
                    plan.cost = cover.cost;
                    plan.strategy = PlanStrategy::MultiIndex { parts: cover.parts };
                }
            }
        }
        plan
    }

    /// Greedy weighted set cover of the query's rows by subindexes. `None`
    /// when the base index is the first pick or no cover exists.
    pub fn multi_index_plan(&self, bm: &Bitmap) -> Option<CoverChoice<T>> {
        self.multi_index_plan_k(bm, self.params.k)
    }

    fn multi_index_plan_k(&self, bm: &Bitmap, k: usize) -> Option<CoverChoice<T>> {
        let sets: Vec<(&Bitmap, usize, usize, &str)> = self
            .subindexes
            .iter()
            .enumerate()
            .map(|(i, s)| (&s.rows, s.card, self.sef_for(i, k), s.key.as_str()))
            .collect();
        let cover = greedy_cover(bm, &sets, self.params.cor)?;
        if cover.parts.first().is_some_and(|p| p.0 == 0) {
            return None;
        }
        Some(cover)
    }

    pub fn execute(&self, q: &[T], bm: &Bitmap, plan: &ServingPlan<T>, k: usize) -> Result<SearchResult<T>> {
        if q.len() != self.ds.dim() {
            return Err(Error::Param(format!(
                "query has dimension {}, dataset has {}",
                q.len(),
                self.ds.dim()
            )));
        }
        match &plan.strategy {
            PlanStrategy::BruteForce => Ok(brute_force_knn(&self.ds, bm, q, k)),
            PlanStrategy::Indexed { subindex, sef } => {
                self.subindexes[*subindex]
                    .graph
                    .search_filtered(&self.ds, q, k, (*sef).max(k), bm)
            }
            PlanStrategy::MultiIndex { parts } => {
                let mut lists = Vec::with_capacity(parts.len());
                for &(i, sef) in parts {
                    lists.push(self.subindexes[i].graph.search_filtered(&self.ds, q, k, sef.max(k), bm)?);
                }
                Ok(merge_results(&lists, k))
            }
        }
    }

    /// Plans and runs one filtered top-`k` query.
    pub fn serve(&self, q: &[T], f: &FilterExpr, k: usize) -> Result<SearchResult<T>> {
        self.serve_with_plan(q, f, k).map(|(r, _)| r)
    }

    pub fn serve_with_plan(&self, q: &[T], f: &FilterExpr, k: usize) -> Result<(SearchResult<T>, ServingPlan<T>)> {
        if k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        let bm = self.ds.bitmap(f);
        let plan = self.plan_k(f, &bm, k);
        let r = self.execute(q, &bm, &plan, k)?;
        Ok((r, plan))
    }
}

/// Top-`k` of the union of several result lists, one entry per id.
pub fn merge_results<T: Scalar>(lists: &[SearchResult<T>], k: usize) -> SearchResult<T> {
    let mut pairs: Vec<(T, usize)> = lists
        .iter()
        .flat_map(|r| r.distances.iter().copied().zip(r.ids.iter().copied()))
        .collect();
    pairs.sort_by(|a, b| crate::knn::cmp_dist(a.0, b.0).then(a.1.cmp(&b.1)));
    let mut seen = std::collections::HashSet::new();
    pairs.retain(|p| seen.insert(p.1));
    SearchResult::from_pairs(pairs, k)
}

/// Modeled cost of serving `f` by searching the base at `sef_inf`, or brute
/// force if cheaper; the planner never does worse than this.
pub fn base_only_cost<T: Scalar>(n: usize, card_f: usize, params: &CostParams<T>) -> T {
    let brute = brute_cost(card_f, params.gamma);
    if card_f == 0 {
        return brute;
    }
    let idx: T = indexed_cost(n, card_f, params.sef_inf, params.cor);
    if idx < brute {
        idx
    } else {
        brute
    }
}
