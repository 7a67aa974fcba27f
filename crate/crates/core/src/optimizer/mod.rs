//! Workload-driven choice of which subindexes to build.

mod dag;
mod greedy;
mod manifest;
mod tally;

use std::collections::HashSet;

pub use dag::{build_candidate_dag, prune_candidates, Candidate, CandidateDag, DagOptions, ROOT};
pub use greedy::{
    greedy_ratio, greedy_ratio_reference, marginal_benefit, ChosenIndex, SelectionResult,
    SelectionState, Step,
};
pub use manifest::{
    ManifestEntry, ManifestStep, ParamsRecord, SelectionManifest, MANIFEST_FORMAT,
    MANIFEST_VERSION,
};
pub use tally::WorkloadTally;

use crate::costmodel::CostParams;
use crate::dataset::AttributedDataset;
use crate::error::Result;
use crate::scalar::Scalar;

/// Pipeline settings for [`fit`] and [`refit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FitOptions {
    pub dag: DagOptions,
    /// Drop candidates that cannot beat brute force on their own filter.
    pub prune: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            dag: DagOptions::default(),
            prune: true,
        }
    }
}

/// Candidate DAG, optional pruning and greedy selection.
pub fn fit<T: Scalar>(
    tally: &WorkloadTally,
    ds: &AttributedDataset<T>,
    params: &CostParams<T>,
    opts: FitOptions,
) -> Result<(CandidateDag, SelectionResult<T>)> {
    params.validate(ds.len())?;
    let mut dag = build_candidate_dag(tally, ds, params, opts.dag)?;
    if opts.prune {
        dag = prune_candidates(&dag, params);
    }
    let sel = greedy_ratio(&dag, params)?;
    Ok((dag, sel))
}

/// Subindexes to add and remove when moving to a new workload. The base
/// index never appears in either list.
#[derive(Clone, Debug, PartialEq)]
pub struct RefitPlan<T> {
    pub to_build: Vec<ChosenIndex>,
    pub to_delete: Vec<ChosenIndex>,
    pub selection: SelectionResult<T>,
}

pub fn refit<T: Scalar>(
    old: &SelectionResult<T>,
    tally: &WorkloadTally,
    ds: &AttributedDataset<T>,
    params: &CostParams<T>,
    opts: FitOptions,
) -> Result<RefitPlan<T>> {
    let (_, selection) = fit(tally, ds, params, opts)?;
    let keys = |s: &SelectionResult<T>| -> HashSet<String> {
        s.chosen
            .iter()
            .filter(|c| !c.filter.is_true())
            .map(|c| c.filter.key())
            .collect()
    };
    let (old_keys, new_keys) = (keys(old), keys(&selection));
    let to_build = selection
        .chosen
        .iter()
        .filter(|c| !c.filter.is_true() && !old_keys.contains(&c.filter.key()))
        .cloned()
        .collect();
    let to_delete = old
        .chosen
        .iter()
        .filter(|c| !c.filter.is_true() && !new_keys.contains(&c.filter.key()))
        .cloned()
        .collect();
    Ok(RefitPlan {
        to_build,
        to_delete,
        selection,
    })
}
