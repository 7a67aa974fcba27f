use std::collections::HashMap;

use crate::costmodel::{indexed_cost, index_model_size, m_downscale, CostParams};
use crate::dataset::AttributedDataset;
use crate::error::Result;
use crate::order::{parents_of, reduce, BitMatrix};
use crate::predicate::{subsumes_bitmap, Bitmap, Dnf, FilterExpr, SubsumptionMode};
use crate::scalar::Scalar;

use super::tally::WorkloadTally;

/// A tally filter considered for its own subindex.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub filter: FilterExpr,
    pub key: String,
    pub card: usize,
    /// Degree the subindex would be built with.
    pub m: usize,
    /// Model size `m * card`.
    pub size: usize,
    /// Occurrences of this filter in the tally (all card-`N` filters are
    /// credited to the root).
    pub count: u64,
    /// False for filters that stay in the workload but may not be selected.
    pub active: bool,
}

/// Knobs for [`build_candidate_dag`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DagOptions {
    pub mode: SubsumptionMode,
    /// Keep only this many of the most frequent filters as candidates.
    pub max_candidates: Option<usize>,
}

/// Candidate subindexes ordered root first, then by descending cardinality
/// and ascending key; that order is a topological order of the edges.
#[derive(Clone, Debug)]
pub struct CandidateDag {
    n_rows: usize,
    mode: SubsumptionMode,
    nodes: Vec<Candidate>,
    /// `subsumes.get(h, q)`: filter `h` subsumes filter `q`.
    subsumes: BitMatrix,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    /// Tally filters no row satisfies; they cost nothing to serve.
    empty_filters: Vec<(FilterExpr, u64)>,
}

pub const ROOT: usize = 0;

/// One node per tally filter with at least one satisfying row, plus the
/// root; edges are the Hasse form of subsumption among active nodes.
pub fn build_candidate_dag<T: Scalar>(
    tally: &WorkloadTally,
    ds: &AttributedDataset<T>,
    params: &CostParams<T>,
    opts: DagOptions,
) -> Result<CandidateDag> {
    params.validate_shape()?;
    let n = ds.len();
    let mut root_count = 0u64;
    let mut empty_filters = Vec::new();
    let mut nodes: Vec<(Candidate, Option<Bitmap>)> = Vec::new();
    for (f, c) in tally.entries() {
        let bm = ds.bitmap(f);
        let card = bm.count();
        if card == 0 {
            empty_filters.push((f.clone(), *c));
        } else if card == n {
            root_count += c;
        } else {
            let m = m_downscale(card, n, params.m_inf)?;
            nodes.push((
                Candidate {
                    key: f.key(),
                    filter: f.clone(),
                    card,
                    m,
                    size: index_model_size(card, m),
                    count: *c,
                    active: true,
                },
                (opts.mode == SubsumptionMode::Bitmap).then_some(bm),
            ));
        }
    }
    if let Some(limit) = opts.max_candidates {
        let mut by_count: Vec<usize> = (0..nodes.len()).collect();
        by_count.sort_by(|&a, &b| {
            nodes[b].0.count.cmp(&nodes[a].0.count).then_with(|| nodes[a].0.key.cmp(&nodes[b].0.key))
        });
        for &i in &by_count[limit.min(by_count.len())..] {
            nodes[i].0.active = false;
        }
    }
    nodes.sort_by(|a, b| b.0.card.cmp(&a.0.card).then_with(|| a.0.key.cmp(&b.0.key)));
    let root = Candidate {
        filter: FilterExpr::True,
        key: FilterExpr::True.key(),
        card: n,
        m: params.m_inf,
        size: index_model_size(n, params.m_inf),
        count: root_count,
        active: true,
    };
    let (mut cands, bitmaps): (Vec<Candidate>, Vec<Option<Bitmap>>) = nodes.into_iter().unzip();
    cands.insert(0, root);

    let subsumes = match opts.mode {
        SubsumptionMode::Logical => {
            let dnfs: Vec<Option<Dnf>> = cands.iter().map(|c| Dnf::of(&c.filter)).collect();
            BitMatrix::from_fn(cands.len(), |h, q| {
                if h == ROOT {
                    return true;
                }
                if q == ROOT || h == q || cands[h].card < cands[q].card {
                    return h == q;
                }
                match dnfs[q].as_ref().and_then(|d| d.implies(&cands[h].filter)) {
                    Some(v) => v,
                    None => crate::predicate::subsumes_structural(&cands[h].filter, &cands[q].filter),
                }
            })
        }
        SubsumptionMode::Bitmap => BitMatrix::from_fn(cands.len(), |h, q| {
            if h == ROOT || h == q {
                return true;
            }
            if q == ROOT || cands[h].card < cands[q].card {
                return false;
            }
            let (bh, bq) = (bitmaps[h - 1].as_ref().unwrap(), bitmaps[q - 1].as_ref().unwrap());
            subsumes_bitmap(bh, bq).unwrap_or(false)
        }),
    };
    let mut dag = CandidateDag {
        n_rows: n,
        mode: opts.mode,
        nodes: cands,
        subsumes,
        children: Vec::new(),
        parents: Vec::new(),
        empty_filters,
    };
    dag.rebuild_edges();
    Ok(dag)
}

/// Deactivates every non-root candidate whose own filter is served at least
/// as cheaply by brute force as by a dedicated subindex at `sef = k`.
/// Reachability between surviving nodes is kept.
pub fn prune_candidates<T: Scalar>(dag: &CandidateDag, params: &CostParams<T>) -> CandidateDag {
    let mut out = dag.clone();
    for c in out.nodes.iter_mut().skip(1) {
        let own: T = indexed_cost(c.card, c.card, params.k, params.cor);
        if own >= crate::costmodel::brute_cost(c.card, params.gamma) {
            c.active = false;
        }
    }
    out.rebuild_edges();
    out
}

impl CandidateDag {
    fn rebuild_edges(&mut self) {
        let active: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].active).collect();
        let rel = BitMatrix::from_fn(active.len(), |a, b| {
            a < b && self.subsumes.get(active[a], active[b])
        });
        let local = reduce(&rel);
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (a, cs) in local.into_iter().enumerate() {
            children[active[a]] = cs.into_iter().map(|b| active[b]).collect();
        }
        self.parents = parents_of(&children);
        self.children = children;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn mode(&self) -> SubsumptionMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Candidate] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Candidate {
        &self.nodes[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(p, cs)| cs.iter().map(move |&c| (p, c)))
            .collect()
    }

    /// Edges as `(parent key, child key)` pairs, sorted.
    pub fn edge_keys(&self) -> Vec<(String, String)> {
        let mut e: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(p, c)| (self.nodes[p].key.clone(), self.nodes[c].key.clone()))
            .collect();
        e.sort();
        e
    }

    pub fn active_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].active)
    }

    pub fn find(&self, f: &FilterExpr) -> Option<usize> {
        if f.is_true() {
            return Some(ROOT);
        }
        let key = f.key();
        self.nodes.iter().position(|c| c.key == key)
    }

    /// Whether candidate `h`'s filter subsumes node `q`'s filter.
    pub fn subsumes(&self, h: usize, q: usize) -> bool {
        self.subsumes.get(h, q)
    }

    pub fn empty_filters(&self) -> &[(FilterExpr, u64)] {
        &self.empty_filters
    }

    /// Node index by key, for building lookups over many nodes.
    pub fn key_index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, c)| (c.key.as_str(), i)).collect()
    }
}
