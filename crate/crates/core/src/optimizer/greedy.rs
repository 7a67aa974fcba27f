use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::costmodel::{brute_cost, indexed_cost, CostParams};
use crate::error::{Error, Result};
use crate::predicate::FilterExpr;
use crate::scalar::Scalar;

use super::dag::{CandidateDag, ROOT};

/// A selected subindex.
#[derive(Clone, Debug, PartialEq)]
pub struct ChosenIndex {
    pub node: usize,
    pub filter: FilterExpr,
    pub card: usize,
    pub m: usize,
    pub size: usize,
}

/// One greedy iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<T> {
    pub node: usize,
    pub filter: FilterExpr,
    pub unit_benefit: T,
    pub benefit: T,
    /// Collection size after this step, base index included.
    pub cumulative_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult<T> {
    /// Root first, then in selection order.
    pub chosen: Vec<ChosenIndex>,
    pub total_size: usize,
    pub steps: Vec<Step<T>>,
    /// Count-weighted modeled serving cost of the tally.
    pub collection_cost: T,
}

impl<T: Scalar> SelectionResult<T> {
    pub fn chosen_keys(&self) -> Vec<String> {
        self.chosen.iter().map(|c| c.filter.key()).collect()
    }

    pub fn subindex_count(&self) -> usize {
        self.chosen.len()
    }
}

/// Per-query serving costs for a growing collection.
///
/// Every DAG node with a nonzero count is a query. `served_by[h]` lists the
/// queries `h` can serve strictly cheaper than brute force, with that cost;
/// only those can ever gain from `h`.
#[derive(Clone, Debug)]
pub struct SelectionState<'a, T> {
    dag: &'a CandidateDag,
    queries: Vec<(usize, T)>,
    served_by: Vec<Vec<(u32, T)>>,
    current: Vec<T>,
    chosen: Vec<bool>,
    order: Vec<usize>,
    size: usize,
}

impl<'a, T: Scalar> SelectionState<'a, T> {
    /// State holding only the root.
    pub fn new(dag: &'a CandidateDag, params: &CostParams<T>) -> Self {
        let queries: Vec<(usize, T)> = dag
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.count > 0)
            .map(|(i, c)| (i, T::from_f64_lossy(c.count as f64)))
            .collect();
        let brute: Vec<T> = queries
            .iter()
            .map(|&(q, _)| brute_cost(dag.node(q).card, params.gamma))
            .collect();
        let mut served_by = vec![Vec::new(); dag.len()];
        for h in dag.active_ids() {
            let card_h = dag.node(h).card;
            for (qi, &(q, _)) in queries.iter().enumerate() {
                if !dag.subsumes(h, q) {
                    continue;
                }
                let c: T = indexed_cost(card_h, dag.node(q).card, params.k, params.cor);
                if c < brute[qi] {
                    served_by[h].push((qi as u32, c));
                }
            }
        }
        let mut st = SelectionState {
            dag,
            queries,
            served_by,
            current: brute,
            chosen: vec![false; dag.len()],
            order: Vec::new(),
            size: 0,
        };
        st.add(ROOT);
        st
    }

    pub fn is_chosen(&self, h: usize) -> bool {
        self.chosen[h]
    }

    /// Node ids in insertion order, root first.
    pub fn chosen(&self) -> &[usize] {
        &self.order
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Drop in collection cost from adding `h`; zero if already chosen.
    pub fn benefit(&self, h: usize) -> T {
        if self.chosen[h] {
            return T::zero();
        }
        let mut total = T::zero();
        for &(qi, c) in &self.served_by[h] {
            let cur = self.current[qi as usize];
            if c < cur {
                total = total + self.queries[qi as usize].1 * (cur - c);
            }
        }
        total
    }

    pub fn unit_benefit(&self, h: usize) -> T {
        self.benefit(h) / T::of_usize(self.dag.node(h).size)
    }

    pub fn add(&mut self, h: usize) {
        if self.chosen[h] {
            return;
        }
        self.chosen[h] = true;
        self.order.push(h);
        self.size += self.dag.node(h).size;
        for &(qi, c) in &self.served_by[h] {
            let cur = &mut self.current[qi as usize];
            if c < *cur {
                *cur = c;
            }
        }
    }

    /// Count-weighted cost of the workload under the current collection.
    pub fn cost(&self) -> T {
        self.queries
            .iter()
            .zip(&self.current)
            .map(|(&(_, w), &c)| w * c)
            .fold(T::zero(), |a, b| a + b)
    }

    /// Modeled cost of node `q`'s filter under the current collection.
    pub fn query_cost(&self, q: usize) -> Option<T> {
        self.queries
            .iter()
            .position(|&(n, _)| n == q)
            .map(|qi| self.current[qi])
    }
}

/// Benefit of adding `h` to the collection `chosen` (root implied).
pub fn marginal_benefit<T: Scalar>(
    dag: &CandidateDag,
    chosen: &[usize],
    h: usize,
    params: &CostParams<T>,
) -> Result<T> {
    if h >= dag.len() || !dag.node(h).active {
        return Err(Error::Param(format!("node {h} is not an active candidate")));
    }
    let mut st = SelectionState::new(dag, params);
    for &c in chosen {
        st.add(c);
    }
    Ok(st.benefit(h))
}

fn check_budget<T: Scalar>(dag: &CandidateDag, params: &CostParams<T>) -> Result<()> {
    params.validate(dag.n_rows())
}

/// Priority order: unit benefit, then raw benefit (both descending), then
/// the smaller canonical key.
#[derive(Clone, Debug)]
struct Entry<T> {
    unit: T,
    benefit: T,
    rank: u32,
    node: u32,
    epoch: u32,
}

fn better<T: Scalar>(a: (T, T, u32), b: (T, T, u32)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .then(b.2.cmp(&a.2))
}

impl<T: Scalar> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Entry<T> {}

impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        better(
            (self.unit, self.benefit, self.rank),
            (other.unit, other.benefit, other.rank),
        )
        .then(other.epoch.cmp(&self.epoch))
    }
}

fn key_ranks(dag: &CandidateDag) -> Vec<u32> {
    let mut ids: Vec<usize> = (0..dag.len()).collect();
    ids.sort_by(|&a, &b| dag.node(a).key.cmp(&dag.node(b).key));
    let mut rank = vec![0u32; dag.len()];
    for (r, i) in ids.into_iter().enumerate() {
        rank[i] = r as u32;
    }
    rank
}

fn finish<T: Scalar>(dag: &CandidateDag, st: &SelectionState<'_, T>, steps: Vec<Step<T>>) -> SelectionResult<T> {
    SelectionResult {
        chosen: st
            .chosen()
            .iter()
            .map(|&i| {
                let c = dag.node(i);
                ChosenIndex {
                    node: i,
                    filter: c.filter.clone(),
                    card: c.card,
                    m: c.m,
                    size: c.size,
                }
            })
            .collect(),
        total_size: st.size(),
        steps,
        collection_cost: st.cost(),
    }
}

/// Greedy selection by unit marginal benefit under the budget.
///
/// Benefits only shrink as the collection grows, so heap entries are upper
/// bounds. After each insertion the new member's parents and children are
/// re-queued with fresh values; any other entry from an older epoch is
/// recomputed when it reaches the top and re-queued if it changed. A
/// candidate that does not fit or has no benefit left is dropped for good.
pub fn greedy_ratio<T: Scalar>(dag: &CandidateDag, params: &CostParams<T>) -> Result<SelectionResult<T>> {
    check_budget(dag, params)?;
    let mut st = SelectionState::new(dag, params);
    let rank = key_ranks(dag);
    let mut version = vec![0u32; dag.len()];
    let mut epoch = 0u32;
    let mut heap = BinaryHeap::new();
    let entry = |st: &SelectionState<'_, T>, h: usize, epoch: u32| Entry {
        unit: st.unit_benefit(h),
        benefit: st.benefit(h),
        rank: rank[h],
        node: h as u32,
        epoch,
    };
    for h in dag.active_ids().filter(|&h| h != ROOT) {
        let e = entry(&st, h, epoch);
        if e.benefit > T::zero() {
            heap.push(e);
        }
    }
    let mut steps = Vec::new();
    let mut dead = vec![false; dag.len()];
    while let Some(top) = heap.pop() {
        let h = top.node as usize;
        if st.is_chosen(h) || dead[h] || top.epoch < version[h] {
            continue;
        }
        if st.size() + dag.node(h).size > params.budget {
            dead[h] = true;
            continue;
        }
        if top.epoch != epoch {
            let fresh = entry(&st, h, epoch);
            version[h] = epoch;
            if fresh.benefit <= T::zero() {
                dead[h] = true;
                continue;
            }
            if fresh.unit != top.unit || fresh.benefit != top.benefit {
                heap.push(fresh);
                continue;
            }
        }
        st.add(h);
        epoch += 1;
        steps.push(Step {
            node: h,
            filter: dag.node(h).filter.clone(),
            unit_benefit: top.unit,
            benefit: top.benefit,
            cumulative_size: st.size(),
        });
        for &nb in dag.parents(h).iter().chain(dag.children(h)) {
            if nb == ROOT || st.is_chosen(nb) || dead[nb] {
                continue;
            }
            let e = entry(&st, nb, epoch);
            version[nb] = epoch;
            if e.benefit > T::zero() {
                heap.push(e);
            } else {
                dead[nb] = true;
            }
        }
    }
    Ok(finish(dag, &st, steps))
}

/// Same selection rule, recomputing every benefit each round. Quadratic;
/// kept as the reference the lazy version is tested against.
pub fn greedy_ratio_reference<T: Scalar>(
    dag: &CandidateDag,
    params: &CostParams<T>,
) -> Result<SelectionResult<T>> {
    check_budget(dag, params)?;
    let mut st = SelectionState::new(dag, params);
    let rank = key_ranks(dag);
    let mut steps = Vec::new();
    loop {
        let mut best: Option<(T, T, u32, usize)> = None;
        for h in dag.active_ids() {
            if st.is_chosen(h) || st.size() + dag.node(h).size > params.budget {
                continue;
            }
            let b = st.benefit(h);
            if b <= T::zero() {
                continue;
            }
            let u = st.unit_benefit(h);
            let cand = (u, b, rank[h], h);
            if best.is_none_or(|x| better((u, b, rank[h]), (x.0, x.1, x.2)) == Ordering::Greater) {
                best = Some(cand);
            }
        }
        let Some((u, b, _, h)) = best else { break };
        st.add(h);
        steps.push(Step {
            node: h,
            filter: dag.node(h).filter.clone(),
            unit_benefit: u,
            benefit: b,
            cumulative_size: st.size(),
        });
    }
    Ok(finish(dag, &st, steps))
}
