//! Key-value configuration.
//!
//! Files hold one `key = value` per line; `#` starts a comment. Values are
//! TOML literals, with bare words read as strings and bare comma lists as
//! arrays. Precedence, lowest first: defaults, file, `FVS_<KEY>` environment
//! variables, explicit overrides.

use std::fs;
use std::path::Path;

use fvs_core::{calibrate_gamma, CostParams, Error, Metric, Result, SubsumptionMode};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::gen::{AttrRecipe, WorkloadRecipe, WorkloadSpec};
use crate::io::VectorFormat;

pub const ENV_PREFIX: &str = "FVS_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Vector file, or `synthetic` for generated gaussian vectors.
    pub dataset: String,
    pub format: VectorFormat,
    pub metric: Metric,
    /// Attribute file; generated from `attr_recipe` when absent.
    pub attributes: Option<String>,
    /// Query vector file; sampled from the dataset when absent.
    pub queries_file: Option<String>,
    /// Filter file aligned with the queries; generated when absent.
    pub filters_file: Option<String>,
    pub n: usize,
    pub dim: usize,
    pub attr_recipe: AttrRecipe,
    pub attr_count: usize,
    pub numeric_count: usize,
    pub workload: WorkloadRecipe,
    pub zipf_exponent: f64,
    pub unfiltered_fraction: f64,
    pub query_count: usize,
    pub query_noise: f64,
    /// Leading share of the query stream used as the observed workload.
    pub fit_fraction: f64,
    /// `sef_inf` values to serve at, ascending.
    pub sweep: Vec<usize>,
    pub k: usize,
    pub m_inf: usize,
    pub sef_inf: usize,
    pub efc: usize,
    /// Budget as a multiple of the base index size; `budget` overrides it.
    pub budget_multiplier: f64,
    pub budget: Option<usize>,
    /// Calibrated from `k` when absent.
    pub gamma: Option<f64>,
    pub cor: f64,
    pub subsumption: SubsumptionMode,
    pub multi_index: bool,
    pub prune: bool,
    pub max_candidates: Option<usize>,
    /// Serving passes per sweep point; the fastest is reported.
    pub repetitions: usize,
    /// Also run with the budget fixed at the base index size.
    pub ablation: bool,
    pub data_seed: u64,
    pub workload_seed: u64,
    pub build_seed: u64,
    pub cache_dir: Option<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset: "synthetic".into(),
            format: VectorFormat::Fvecs,
            metric: Metric::L2,
            attributes: None,
            queries_file: None,
            filters_file: None,
            n: 10_000,
            dim: 32,
            attr_recipe: AttrRecipe::PerRank,
            attr_count: 20,
            numeric_count: 2,
            workload: WorkloadRecipe::ZipfConjunctive,
            zipf_exponent: 1.0,
            unfiltered_fraction: 0.2,
            query_count: 2000,
            query_noise: 0.1,
            fit_fraction: 0.25,
            sweep: vec![10, 20, 40, 80, 160],
            k: 10,
            m_inf: 32,
            sef_inf: 50,
            efc: 40,
            budget_multiplier: 3.0,
            budget: None,
            gamma: None,
            cor: 0.5,
            subsumption: SubsumptionMode::Logical,
            multi_index: false,
            prune: true,
            max_candidates: None,
            repetitions: 3,
            ablation: true,
            data_seed: 1,
            workload_seed: 2,
            build_seed: 3,
            cache_dir: None,
        }
    }
}

/// Every configurable key.
pub const FIELDS: &[&str] = &[
    "dataset",
    "format",
    "metric",
    "attributes",
    "queries_file",
    "filters_file",
    "n",
    "dim",
    "attr_recipe",
    "attr_count",
    "numeric_count",
    "workload",
    "zipf_exponent",
    "unfiltered_fraction",
    "query_count",
    "query_noise",
    "fit_fraction",
    "sweep",
    "k",
    "m_inf",
    "sef_inf",
    "efc",
    "budget_multiplier",
    "budget",
    "gamma",
    "cor",
    "subsumption",
    "multi_index",
    "prune",
    "max_candidates",
    "repetitions",
    "ablation",
    "data_seed",
    "workload_seed",
    "build_seed",
    "cache_dir",
];

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Reads one value: a TOML literal, else a comma list, else a string.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    let literal = |s: &str| toml::from_str::<Table>(&format!("v = {s}")).ok().and_then(|mut t| t.remove("v"));
    if let Some(v) = literal(raw) {
        return v;
    }
    if raw.contains(',') {
        if let Some(v) = literal(&format!("[{raw}]")) {
            return v;
        }
    }
    Value::String(raw.to_string())
}

fn check_key(key: &str) -> Result<()> {
    if FIELDS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown config key {key:?}")))
    }
}

/// Parses `key = value` lines.
pub fn parse_text(text: &str) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(p) if !line[..p].contains(['"', '\'']) => &line[..p],
            _ => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = normalize_key(k);
        check_key(&key)?;
        out.push((key, parse_value(v)));
    }
    Ok(out)
}

/// Parses `key=value` override strings such as command-line `--set` items.
pub fn parse_overrides<S: AsRef<str>>(items: &[S]) -> Result<Vec<(String, Value)>> {
    items
        .iter()
        .map(|s| {
            let s = s.as_ref();
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
            let key = normalize_key(k);
            check_key(&key)?;
            Ok((key, parse_value(v)))
        })
        .collect()
}

/// `FVS_<KEY>` variables from `vars`.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let key = normalize_key(rest);
        if FIELDS.contains(&key.as_str()) {
            out.push((key, parse_value(&value)));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

impl BenchConfig {
    pub fn with_values(&self, values: impl IntoIterator<Item = (String, Value)>) -> Result<Self> {
        let mut table = match Value::try_from(self) {
            Ok(Value::Table(t)) => t,
            _ => return Err(Error::Config("config is not a table".into())),
        };
        for (k, v) in values {
            check_key(&k)?;
            let v = match (table.get(&k), v) {
                (Some(Value::Array(_)), v @ (Value::Integer(_) | Value::Float(_))) => Value::Array(vec![v]),
                (_, v) => v,
            };
            table.insert(k, v);
        }
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then `file`, then the process environment, then `overrides`.
    pub fn load<S: AsRef<str>>(file: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut values = match file {
            Some(p) => parse_text(&fs::read_to_string(p)?)?,
            None => Vec::new(),
        };
        values.extend(env_overrides(std::env::vars()));
        values.extend(parse_overrides(overrides)?);
        Self::default().with_values(values)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.fit_fraction > 0.0 && self.fit_fraction <= 1.0) {
            return bad(format!("fit_fraction {} is outside (0, 1]", self.fit_fraction));
        }
        if self.sweep.is_empty() || self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sweep {:?} must be nonempty and ascending", self.sweep));
        }
        if self.k == 0 || self.sweep[0] < self.k || self.sef_inf < self.k {
            return bad(format!("k {} must be at least 1 and at most every sef", self.k));
        }
        if self.m_inf < 2 || self.efc == 0 || self.repetitions == 0 {
            return bad("m_inf must be at least 2; efc and repetitions at least 1".into());
        }
        if self.budget.is_none() && self.budget_multiplier < 1.0 {
            return bad(format!("budget_multiplier {} is below 1", self.budget_multiplier));
        }
        if self.gamma.is_some_and(|g| g <= 0.0) || self.cor <= 0.0 {
            return bad("gamma and cor must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.unfiltered_fraction) || self.query_noise < 0.0 || self.zipf_exponent < 0.0 {
            return bad("unfiltered_fraction, query_noise or zipf_exponent out of range".into());
        }
        Ok(())
    }

    /// Budget in model size units for a dataset of `n` rows.
    pub fn budget_for(&self, n: usize) -> usize {
        self.budget
            .unwrap_or_else(|| (self.budget_multiplier * (self.m_inf * n) as f64).round() as usize)
    }

    pub fn cost_params(&self, n: usize) -> CostParams<f32> {
        let p = CostParams::new(self.m_inf, self.sef_inf, self.k, self.budget_for(n)).with_cor(self.cor as f32);
        p.with_gamma(self.gamma.map_or_else(|| calibrate_gamma(self.k), |g| g as f32))
    }

    pub fn workload_spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            recipe: self.workload,
            size: self.query_count,
            zipf_exponent: self.zipf_exponent,
            unfiltered_fraction: self.unfiltered_fraction,
            query_noise: self.query_noise,
            seed: self.workload_seed,
        }
    }

    /// Number of leading queries forming the observed workload.
    pub fn fit_count(&self, queries: usize) -> usize {
        ((self.fit_fraction * queries as f64).ceil() as usize).clamp(1.min(queries), queries)
    }
}
