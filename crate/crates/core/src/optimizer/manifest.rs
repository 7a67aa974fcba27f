use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costmodel::CostParams;
use crate::error::{Error, Result};
use crate::predicate::{FilterExpr, SubsumptionMode};
use crate::scalar::Scalar;

use super::greedy::{ChosenIndex, SelectionResult, Step};

pub const MANIFEST_FORMAT: &str = "fvs-selection";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub m_inf: usize,
    pub sef_inf: usize,
    pub k: usize,
    pub gamma: f64,
    pub cor: f64,
    pub budget: usize,
}

impl ParamsRecord {
    pub fn of<T: Scalar>(p: &CostParams<T>) -> Self {
        Self {
            m_inf: p.m_inf,
            sef_inf: p.sef_inf,
            k: p.k,
            gamma: p.gamma.to_f64_lossy(),
            cor: p.cor.to_f64_lossy(),
            budget: p.budget,
        }
    }

    pub fn to_params<T: Scalar>(&self) -> CostParams<T> {
        CostParams {
            m_inf: self.m_inf,
            sef_inf: self.sef_inf,
            k: self.k,
            gamma: T::from_f64_lossy(self.gamma),
            cor: T::from_f64_lossy(self.cor),
            budget: self.budget,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub filter: FilterExpr,
    pub card: usize,
    pub m: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestStep {
    pub filter: FilterExpr,
    pub unit_benefit: f64,
    pub benefit: f64,
    pub cumulative_size: usize,
}

/// On-disk record of a selection. The first subindex is always the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub format: String,
    pub version: u32,
    pub n_rows: usize,
    pub subsumption: SubsumptionMode,
    pub params: ParamsRecord,
    pub subindexes: Vec<ManifestEntry>,
    pub steps: Vec<ManifestStep>,
    pub total_size: usize,
    pub collection_cost: f64,
}

impl SelectionManifest {
    pub fn new<T: Scalar>(
        sel: &SelectionResult<T>,
        n_rows: usize,
        mode: SubsumptionMode,
        params: &CostParams<T>,
    ) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            n_rows,
            subsumption: mode,
            params: ParamsRecord::of(params),
            subindexes: sel
                .chosen
                .iter()
                .map(|c| ManifestEntry {
                    filter: c.filter.clone(),
                    card: c.card,
                    m: c.m,
                    size: c.size,
                })
                .collect(),
            steps: sel
                .steps
                .iter()
                .map(|s| ManifestStep {
                    filter: s.filter.clone(),
                    unit_benefit: s.unit_benefit.to_f64_lossy(),
                    benefit: s.benefit.to_f64_lossy(),
                    cumulative_size: s.cumulative_size,
                })
                .collect(),
            total_size: sel.total_size,
            collection_cost: sel.collection_cost.to_f64_lossy(),
        }
    }

    /// Rebuilds the selection. Node ids are positions in the manifest.
    pub fn to_selection<T: Scalar>(&self) -> SelectionResult<T> {
        let pos = |f: &FilterExpr| {
            self.subindexes
                .iter()
                .position(|e| &e.filter == f)
                .unwrap_or(usize::MAX)
        };
        SelectionResult {
            chosen: self
                .subindexes
                .iter()
                .enumerate()
                .map(|(i, e)| ChosenIndex {
                    node: i,
                    filter: e.filter.clone(),
                    card: e.card,
                    m: e.m,
                    size: e.size,
                })
                .collect(),
            total_size: self.total_size,
            steps: self
                .steps
                .iter()
                .map(|s| Step {
                    node: pos(&s.filter),
                    filter: s.filter.clone(),
                    unit_benefit: T::from_f64_lossy(s.unit_benefit),
                    benefit: T::from_f64_lossy(s.benefit),
                    cumulative_size: s.cumulative_size,
                })
                .collect(),
            collection_cost: T::from_f64_lossy(self.collection_cost),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MANIFEST_FORMAT {
            return Err(Error::Bundle(format!("unexpected manifest format {:?}", self.format)));
        }
        if self.version != MANIFEST_VERSION {
            return Err(Error::Bundle(format!("unsupported manifest version {}", self.version)));
        }
        match self.subindexes.first() {
            Some(e) if e.filter.is_true() && e.card == self.n_rows => {}
            _ => return Err(Error::Bundle("first subindex must be the base index".into())),
        }
        let total: usize = self.subindexes.iter().map(|e| e.size).sum();
        if total != self.total_size {
            return Err(Error::Bundle(format!(
                "sizes sum to {total}, manifest says {}",
                self.total_size
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
