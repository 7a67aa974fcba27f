//! Directory layout of a saved collection:
//!
//! ```text
//! manifest.json        selection manifest
//! bundle.json          build settings and graph file list
//! graphs/NNNN.hnsw     one graph snapshot per subindex
//! checksums.sha256     "<hex>  <path>" for every file above
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BuildOptions, IndexCollection, Subindex};
use crate::dataset::AttributedDataset;
use crate::error::{Error, Result};
use crate::hnsw::HnswGraph;
use crate::optimizer::SelectionManifest;
use crate::predicate::{FilterExpr, SubsumptionMode};
use crate::scalar::Scalar;

pub const BUNDLE_FORMAT: &str = "fvs-bundle";
pub const BUNDLE_VERSION: u32 = 1;
const CHECKSUMS: &str = "checksums.sha256";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub filter: FilterExpr,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleInfo {
    pub format: String,
    pub version: u32,
    pub dataset_hash: String,
    pub n_rows: usize,
    pub dim: usize,
    pub efc: usize,
    pub seed: u64,
    pub subsumption: SubsumptionMode,
    pub multi_index: bool,
    pub graphs: Vec<GraphFile>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl<T: Scalar> IndexCollection<T> {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("graphs"))?;
        let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        let manifest = SelectionManifest::new(&self.selection, self.ds.len(), self.opts.mode, &self.params);
        files.insert("manifest.json".into(), manifest.to_json()?.into_bytes());
        let mut graphs = Vec::new();
        for (i, s) in self.subindexes.iter().enumerate() {
            let file = format!("graphs/{i:04}.hnsw");
            files.insert(file.clone(), s.graph.to_bytes()?);
            graphs.push(GraphFile {
                filter: s.filter.clone(),
                file,
            });
        }
        let info = BundleInfo {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            dataset_hash: self.ds.content_hash(),
            n_rows: self.ds.len(),
            dim: self.ds.dim(),
            efc: self.opts.efc,
            seed: self.opts.seed,
            subsumption: self.opts.mode,
            multi_index: self.opts.multi_index,
            graphs,
        };
        files.insert("bundle.json".into(), serde_json::to_vec_pretty(&info)?);
        let mut sums = String::new();
        for (name, bytes) in &files {
            fs::write(dir.join(name), bytes)?;
            sums.push_str(&format!("{}  {name}\n", sha256_hex(bytes)));
        }
        fs::write(dir.join(CHECKSUMS), sums)?;
        Ok(())
    }

    /// Loads a bundle built over `ds`. With `expect_mode` set, a bundle
    /// built under the other subsumption mode is rejected.
    pub fn load(
        dir: impl AsRef<Path>,
        ds: Arc<AttributedDataset<T>>,
        expect_mode: Option<SubsumptionMode>,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        let sums = fs::read_to_string(dir.join(CHECKSUMS))?;
        let mut verified: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for line in sums.lines().filter(|l| !l.trim().is_empty()) {
            let (hash, name) = line
                .split_once("  ")
                .ok_or_else(|| Error::Bundle(format!("bad checksum line {line:?}")))?;
            if name.contains("..") || Path::new(name).is_absolute() {
                return Err(Error::Bundle(format!("unsafe path {name:?}")));
            }
            let bytes = fs::read(dir.join(name))?;
            if sha256_hex(&bytes) != hash {
                return Err(Error::Bundle(format!("checksum mismatch for {name}")));
            }
            verified.insert(name.to_string(), bytes);
        }
        let get = |name: &str| {
            verified
                .get(name)
                .ok_or_else(|| Error::Bundle(format!("{name} is not covered by checksums")))
        };
        let info: BundleInfo = serde_json::from_slice(get("bundle.json")?)?;
        if info.format != BUNDLE_FORMAT || info.version != BUNDLE_VERSION {
            return Err(Error::Bundle(format!("unsupported bundle {} v{}", info.format, info.version)));
        }
        if let Some(m) = expect_mode {
            if m != info.subsumption {
                return Err(Error::Bundle(format!(
                    "bundle uses {} subsumption, {m} requested",
                    info.subsumption
                )));
            }
        }
        if info.n_rows != ds.len() || info.dim != ds.dim() || info.dataset_hash != ds.content_hash() {
            return Err(Error::Bundle("bundle was built on a different dataset".into()));
        }
        let manifest = SelectionManifest::from_json(std::str::from_utf8(get("manifest.json")?).map_err(|e| Error::Bundle(e.to_string()))?)?;
        if manifest.subsumption != info.subsumption {
            return Err(Error::Bundle("manifest and bundle disagree on subsumption mode".into()));
        }
        let selection = manifest.to_selection::<T>();
        let params = manifest.params.to_params::<T>();
        let mut subindexes = Vec::with_capacity(info.graphs.len());
        for g in &info.graphs {
            let entry = manifest
                .subindexes
                .iter()
                .find(|e| e.filter == g.filter)
                .ok_or_else(|| Error::Bundle(format!("graph for {} is not in the manifest", g.filter)))?;
            let graph = HnswGraph::from_bytes(get(&g.file)?)?;
            let rows = ds.bitmap(&g.filter);
            if graph.len() != rows.count() || graph.row_ids().any(|r| !rows.contains(r)) {
                return Err(Error::Bundle(format!("graph rows do not match filter {}", g.filter)));
            }
            if graph.m() != entry.m {
                return Err(Error::Bundle(format!("graph degree differs from manifest for {}", g.filter)));
            }
            subindexes.push(Subindex {
                key: g.filter.key(),
                filter: g.filter.clone(),
                card: rows.count(),
                m: entry.m,
                graph,
                rows,
            });
        }
        if subindexes.len() != manifest.subindexes.len() || !subindexes.first().is_some_and(|s| s.filter.is_true()) {
            return Err(Error::Bundle("graph list does not match the manifest".into()));
        }
        let opts = BuildOptions {
            efc: info.efc,
            seed: info.seed,
            mode: info.subsumption,
            multi_index: info.multi_index,
        };
        Self::assemble(ds, &params, opts, subindexes, selection)
    }
}
