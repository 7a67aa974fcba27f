//! Fit-then-serve benchmark with a `sef_inf` sweep.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use fvs_core::optimizer::{fit, DagOptions, FitOptions, WorkloadTally};
use fvs_core::{AttributedDataset, BuildOptions, Error, FilterExpr, IndexCollection, Result};
use serde::{Deserialize, Serialize};

use crate::config::BenchConfig;
use crate::gen::{gaussian_vectors, gen_attributes, gen_workload};
use crate::io::{ingest, read_attributes, read_filters, read_vectors};
use crate::truth::{ground_truth, ground_truth_cached, GroundTruth};

pub const FITTED: &str = "fitted";
pub const NO_EXTRA_BUDGET: &str = "no-extra-budget";

/// Strategy buckets in report column order.
pub const STRATEGIES: [&str; 4] = ["brute", "base", "indexed", "multi"];

/// Dataset, query stream and exact answers for one benchmark.
#[derive(Clone, Debug)]
pub struct Workbench {
    pub ds: Arc<AttributedDataset<f32>>,
    pub queries: Vec<Vec<f32>>,
    pub filters: Vec<FilterExpr>,
    pub truth: GroundTruth,
}

pub fn load_dataset(cfg: &BenchConfig) -> Result<AttributedDataset<f32>> {
    if cfg.dataset == "synthetic" {
        let m = gaussian_vectors(cfg.n, cfg.dim, cfg.data_seed);
        let attrs = match &cfg.attributes {
            Some(p) => read_attributes(p)?,
            None => gen_attributes(cfg.n, cfg.attr_recipe, cfg.attr_count, cfg.numeric_count, cfg.data_seed ^ 0x5eed),
        };
        if attrs.len() != cfg.n {
            return Err(Error::Dataset(format!("{} attribute lines for {} vectors", attrs.len(), cfg.n)));
        }
        return AttributedDataset::new(cfg.dim, m.data, attrs, cfg.metric);
    }
    match &cfg.attributes {
        Some(p) => ingest(&cfg.dataset, cfg.format, Some(Path::new(p)), cfg.metric),
        None => {
            let m = read_vectors(&cfg.dataset, cfg.format)?;
            let attrs = gen_attributes(m.rows(), cfg.attr_recipe, cfg.attr_count, cfg.numeric_count, cfg.data_seed ^ 0x5eed);
            AttributedDataset::new(m.dim, m.data, attrs, cfg.metric)
        }
    }
}

pub fn prepare(cfg: &BenchConfig) -> Result<Workbench> {
    cfg.validate()?;
    let ds = Arc::new(load_dataset(cfg)?);
    let (mut queries, mut filters) = gen_workload(&cfg.workload_spec(), &ds)?;
    if let Some(p) = &cfg.queries_file {
        queries = read_vectors(p, cfg.format)?.to_rows();
    }
    if let Some(p) = &cfg.filters_file {
        filters = read_filters(p)?;
    }
    if queries.len() != filters.len() {
        return Err(Error::Config(format!("{} queries but {} filters", queries.len(), filters.len())));
    }
    if let Some(q) = queries.iter().find(|q| q.len() != ds.dim()) {
        return Err(Error::Dataset(format!("query dimension {} vs dataset {}", q.len(), ds.dim())));
    }
    let truth = match &cfg.cache_dir {
        Some(dir) => ground_truth_cached(Path::new(dir), &ds, &queries, &filters, cfg.k)?.0,
        None => ground_truth(&ds, &queries, &filters, cfg.k)?,
    };
    Ok(Workbench {
        ds,
        queries,
        filters,
        truth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub variant: String,
    pub budget: usize,
    pub fit_secs: f64,
    pub build_secs: f64,
    pub model_size: usize,
    pub actual_bytes: usize,
    pub subindex_count: usize,
    pub chosen: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    pub sef_inf: usize,
    pub recall: f64,
    pub qps: f64,
    pub total_secs: f64,
    pub brute_secs: f64,
    pub base_secs: f64,
    pub indexed_secs: f64,
    pub multi_secs: f64,
    pub brute_plans: usize,
    pub base_plans: usize,
    pub indexed_plans: usize,
    pub multi_plans: usize,
}

impl BenchRow {
    pub fn strategy_secs(&self) -> f64 {
        self.brute_secs + self.base_secs + self.indexed_secs + self.multi_secs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub queries: usize,
    pub fit_queries: usize,
    pub builds: Vec<BuildSummary>,
    pub rows: Vec<BenchRow>,
}

/// One single-threaded pass over the query stream.
#[derive(Clone, Debug)]
pub struct ServePass {
    pub wall_secs: f64,
    pub strategy_secs: [f64; 4],
    pub plans: [usize; 4],
    pub results: Vec<Vec<usize>>,
}

fn bucket(tag: &str) -> usize {
    STRATEGIES.iter().position(|s| *s == tag).unwrap_or(0)
}

pub fn serve_pass(c: &IndexCollection<f32>, queries: &[Vec<f32>], filters: &[FilterExpr], k: usize) -> Result<ServePass> {
    let mut strategy_secs = [0.0; 4];
    let mut plans = [0; 4];
    let mut results = Vec::with_capacity(queries.len());
    let start = Instant::now();
    for (q, f) in queries.iter().zip(filters) {
        let t = Instant::now();
        let (res, plan) = c.serve_with_plan(q, f, k)?;
        let b = bucket(plan.strategy.tag());
        strategy_secs[b] += t.elapsed().as_secs_f64();
        plans[b] += 1;
        results.push(res.ids);
    }
    Ok(ServePass {
        wall_secs: start.elapsed().as_secs_f64(),
        strategy_secs,
        plans,
        results,
    })
}

/// Fits on the leading queries, builds, then serves every query at each
/// sweep point.
pub fn run_variant(cfg: &BenchConfig, wb: &Workbench, variant: &str, budget: usize) -> Result<(BuildSummary, Vec<BenchRow>)> {
    let n = wb.ds.len();
    let fit_n = cfg.fit_count(wb.filters.len());
    let tally = WorkloadTally::from_filters(wb.filters[..fit_n].iter().cloned());
    let params = cfg.cost_params(n).with_budget(budget);
    let opts = FitOptions {
        dag: DagOptions {
            mode: cfg.subsumption,
            max_candidates: cfg.max_candidates,
        },
        prune: cfg.prune,
    };
    let t = Instant::now();
    let (_, selection) = fit(&tally, &wb.ds, &params, opts)?;
    let fit_secs = t.elapsed().as_secs_f64();
    let build = BuildOptions {
        efc: cfg.efc,
        seed: cfg.build_seed,
        mode: cfg.subsumption,
        multi_index: cfg.multi_index,
    };
    let t = Instant::now();
    let collection = IndexCollection::build(wb.ds.clone(), &selection, &params, build)?;
    let summary = BuildSummary {
        variant: variant.into(),
        budget,
        fit_secs,
        build_secs: t.elapsed().as_secs_f64(),
        model_size: collection.model_size(),
        actual_bytes: collection.actual_bytes(),
        subindex_count: collection.len(),
        chosen: collection.subindexes().iter().map(|s| s.key.clone()).collect(),
    };
    let mut rows = Vec::new();
    for &sef in &cfg.sweep {
        let c = collection.with_sef_inf(sef)?;
        let mut best: Option<ServePass> = None;
        let mut recall = 0.0;
        for rep in 0..cfg.repetitions {
            let pass = serve_pass(&c, &wb.queries, &wb.filters, cfg.k)?;
            if rep == 0 {
                recall = wb.truth.mean_recall(&pass.results);
            }
            if best.as_ref().is_none_or(|b| pass.wall_secs < b.wall_secs) {
                best = Some(pass);
            }
        }
        let p = best.expect("at least one repetition");
        rows.push(BenchRow {
            variant: variant.into(),
            sef_inf: sef,
            recall,
            qps: wb.queries.len() as f64 / p.wall_secs.max(1e-12),
            total_secs: p.wall_secs,
            brute_secs: p.strategy_secs[0],
            base_secs: p.strategy_secs[1],
            indexed_secs: p.strategy_secs[2],
            multi_secs: p.strategy_secs[3],
            brute_plans: p.plans[0],
            base_plans: p.plans[1],
            indexed_plans: p.plans[2],
            multi_plans: p.plans[3],
        });
    }
    Ok((summary, rows))
}

pub fn run_prepared(cfg: &BenchConfig, wb: &Workbench) -> Result<BenchReport> {
    let n = wb.ds.len();
    let mut builds = Vec::new();
    let mut rows = Vec::new();
    let (b, r) = run_variant(cfg, wb, FITTED, cfg.budget_for(n))?;
    builds.push(b);
    rows.extend(r);
    if cfg.ablation {
        let (b, r) = run_variant(cfg, wb, NO_EXTRA_BUDGET, cfg.m_inf * n)?;
        builds.push(b);
        rows.extend(r);
    }
    Ok(BenchReport {
        config: cfg.clone(),
        queries: wb.queries.len(),
        fit_queries: cfg.fit_count(wb.queries.len()),
        builds,
        rows,
    })
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    run_prepared(cfg, &prepare(cfg)?)
}

fn csv_of<S: Serialize>(items: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for it in items {
        w.serialize(it).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

impl BenchReport {
    pub fn rows_of<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    /// Highest QPS among sweep points of `variant` reaching `min_recall`.
    pub fn best_qps(&self, variant: &str, min_recall: f64) -> Option<f64> {
        self.rows_of(variant)
            .filter(|r| r.recall >= min_recall)
            .map(|r| r.qps)
            .max_by(f64::total_cmp)
    }

    /// Fitted over no-extra-budget QPS, each at its best point reaching
    /// `min_recall`.
    pub fn speedup(&self, min_recall: f64) -> Option<f64> {
        Some(self.best_qps(FITTED, min_recall)? / self.best_qps(NO_EXTRA_BUDGET, min_recall)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_of(&self.rows)
    }

    pub fn builds_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Flat<'a> {
            variant: &'a str,
            budget: usize,
            fit_secs: f64,
            build_secs: f64,
            model_size: usize,
            actual_bytes: usize,
            subindex_count: usize,
        }
        let flat: Vec<Flat> = self
            .builds
            .iter()
            .map(|b| Flat {
                variant: &b.variant,
                budget: b.budget,
                fit_secs: b.fit_secs,
                build_secs: b.build_secs,
                model_size: b.model_size,
                actual_bytes: b.actual_bytes,
                subindex_count: b.subindex_count,
            })
            .collect();
        csv_of(&flat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.csv`, `builds.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.to_csv()?)?;
        fs::write(dir.join("builds.csv"), self.builds_csv()?)?;
        fs::write(dir.join("summary.json"), self.to_json()?)?;
        Ok(())
    }
}
