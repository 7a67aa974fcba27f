use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fvs_core::optimizer::{fit, refit, DagOptions, FitOptions, WorkloadTally};
use fvs_core::{BuildOptions, FilterExpr, IndexCollection, Result};
use fvs_harness::bench::{load_dataset, prepare, run_prepared};
use fvs_harness::gen::gen_workload;
use fvs_harness::io::{read_filters, read_vectors, write_attributes, write_filters, write_vectors, Matrix};
use fvs_harness::BenchConfig;

#[derive(Parser, Debug)]
#[command(name = "fvs", version, about = "Workload-fitted filtered vector search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// Key-value config file.
    #[arg(long, short = 'c', value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set k=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Vector file; `synthetic` generates one from the config.
    #[arg(long, value_name = "FILE")]
    data: Option<String>,

    /// Attribute file aligned with the vectors.
    #[arg(long, value_name = "FILE")]
    attrs: Option<String>,

    /// Vector file format: fvecs or raw.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a collection to a workload and save it as a bundle.
    Build {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Workload tally: `<count>\t<filter>` lines.
        #[arg(long, value_name = "FILE")]
        workload: Option<PathBuf>,
        /// Bundle directory to write.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Answer a query batch from a saved bundle.
    Serve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Bundle directory written by `build`.
        #[arg(long, value_name = "DIR")]
        bundle: PathBuf,
        /// Query vectors, in the dataset's format.
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        /// One filter per query.
        #[arg(long, value_name = "FILE")]
        filters: PathBuf,
        /// Results CSV; stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run a fit-then-serve sweep and write the report.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Report directory; the table is only printed when absent.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Refit a saved bundle to a new workload.
    Refit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Bundle directory to refit.
        #[arg(long, value_name = "DIR")]
        bundle: PathBuf,
        /// New workload tally: `<count>\t<filter>` lines.
        #[arg(long, value_name = "FILE")]
        workload: PathBuf,
        /// Output bundle; the input bundle is replaced when absent.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset and workload.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn load_config(cfg: &ConfigArgs, data: Option<&DataArgs>) -> Result<BenchConfig> {
    let mut set = cfg.set.clone();
    if let Some(d) = data {
        let quoted = |k: &str, v: &str| format!("{k}={}", toml_string(v));
        set.extend(d.data.as_deref().map(|v| quoted("dataset", v)));
        set.extend(d.attrs.as_deref().map(|v| quoted("attributes", v)));
        set.extend(d.format.as_deref().map(|v| quoted("format", v)));
    }
    BenchConfig::load(cfg.config.as_deref(), &set)
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn fit_options(cfg: &BenchConfig) -> FitOptions {
    FitOptions {
        dag: DagOptions {
            mode: cfg.subsumption,
            max_candidates: cfg.max_candidates,
        },
        prune: cfg.prune,
    }
}

fn cmd_build(cfg: &BenchConfig, workload: Option<&Path>, out: &Path) -> Result<()> {
    let ds = Arc::new(load_dataset(cfg)?);
    let tally = match workload {
        Some(p) => WorkloadTally::parse(&fs::read_to_string(p)?)?,
        None => {
            let filters = match &cfg.filters_file {
                Some(p) => read_filters(p)?,
                None => gen_workload(&cfg.workload_spec(), &ds)?.1,
            };
            let n = cfg.fit_count(filters.len());
            WorkloadTally::from_filters(filters.into_iter().take(n))
        }
    };
    let params = cfg.cost_params(ds.len());
    let (_, selection) = fit(&tally, &ds, &params, fit_options(cfg))?;
    let opts = BuildOptions {
        efc: cfg.efc,
        seed: cfg.build_seed,
        mode: cfg.subsumption,
        multi_index: cfg.multi_index,
    };
    let c = IndexCollection::build(ds, &selection, &params, opts)?;
    c.save(out)?;
    println!(
        "built {} subindexes, model size {} of budget {}",
        c.len(),
        c.model_size(),
        params.budget
    );
    for s in c.subindexes() {
        println!("  {:<32} card {:>8}  M {:>3}", s.key, s.card, s.m);
    }
    Ok(())
}

fn cmd_serve(cfg: &BenchConfig, bundle: &Path, queries: &Path, filters: &Path, out: Option<&Path>) -> Result<()> {
    let ds = Arc::new(load_dataset(cfg)?);
    let c = IndexCollection::load(bundle, ds, None)?.with_sef_inf(cfg.sef_inf)?;
    let q = read_vectors(queries, cfg.format)?;
    let f: Vec<FilterExpr> = read_filters(filters)?;
    if q.rows() != f.len() {
        return Err(fvs_core::Error::Config(format!("{} queries but {} filters", q.rows(), f.len())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| fvs_core::Error::Config(format!("csv: {e}"));
    w.write_record(["query", "rank", "id", "distance", "strategy"]).map_err(csv_err)?;
    for (i, filter) in f.iter().enumerate() {
        let (res, plan) = c.serve_with_plan(q.row(i), filter, cfg.k)?;
        for (rank, (id, d)) in res.ids.iter().zip(&res.distances).enumerate() {
            w.write_record([i.to_string(), rank.to_string(), id.to_string(), d.to_string(), plan.strategy.tag().to_string()])
                .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| fvs_core::Error::Config(e.to_string()))?;
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn cmd_bench(cfg: &BenchConfig, out: Option<&Path>) -> Result<()> {
    let wb = prepare(cfg)?;
    let report = run_prepared(cfg, &wb)?;
    for b in &report.builds {
        println!(
            "{:<16} subindexes {:>4}  model size {:>10}  build {:>7.2}s  fit {:>7.3}s",
            b.variant, b.subindex_count, b.model_size, b.build_secs, b.fit_secs
        );
    }
    println!("{:<16} {:>7} {:>7} {:>10}  plans brute/base/indexed/multi", "variant", "sef_inf", "recall", "qps");
    for r in &report.rows {
        println!(
            "{:<16} {:>7} {:>7.4} {:>10.1}  {}/{}/{}/{}",
            r.variant, r.sef_inf, r.recall, r.qps, r.brute_plans, r.base_plans, r.indexed_plans, r.multi_plans
        );
    }
    if let Some(dir) = out {
        report.write(dir)?;
        println!("report written to {}", dir.display());
    }
    Ok(())
}

fn cmd_refit(cfg: &BenchConfig, bundle: &Path, workload: &Path, out: Option<&Path>) -> Result<()> {
    let ds = Arc::new(load_dataset(cfg)?);
    let c = IndexCollection::load(bundle, ds.clone(), None)?;
    let tally = WorkloadTally::parse(&fs::read_to_string(workload)?)?;
    let mut opts = fit_options(cfg);
    opts.dag.mode = c.mode();
    let plan = refit(c.selection(), &tally, &ds, c.params(), opts)?;
    for b in &plan.to_build {
        println!("build  {}", b.filter.key());
    }
    for d in &plan.to_delete {
        println!("delete {}", d.filter.key());
    }
    let next = c.apply_refit(&plan)?;
    let dest = out.unwrap_or(bundle);
    let graphs = dest.join("graphs");
    if graphs.exists() {
        fs::remove_dir_all(&graphs)?;
    }
    next.save(dest)?;
    println!("{} subindexes written to {}", next.len(), dest.display());
    Ok(())
}

fn cmd_gen(cfg: &BenchConfig, out: &Path) -> Result<()> {
    let ds = load_dataset(cfg)?;
    fs::create_dir_all(out)?;
    let ext = match cfg.format {
        fvs_harness::VectorFormat::Fvecs => "fvecs",
        fvs_harness::VectorFormat::Raw => "f32",
    };
    let base = Matrix {
        dim: ds.dim(),
        data: ds.vectors().to_vec(),
    };
    write_vectors(out.join(format!("base.{ext}")), &base, cfg.format)?;
    write_attributes(out.join("attrs.txt"), ds.attributes())?;
    let (queries, filters) = gen_workload(&cfg.workload_spec(), &ds)?;
    write_vectors(out.join(format!("queries.{ext}")), &Matrix::from_rows(&queries)?, cfg.format)?;
    write_filters(out.join("filters.txt"), &filters)?;
    let n = cfg.fit_count(filters.len());
    fs::write(out.join("workload.tsv"), WorkloadTally::from_filters(filters.into_iter().take(n)).to_text())?;
    println!("wrote {} vectors and {} queries to {}", ds.len(), queries.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { cfg, data, workload, out } => cmd_build(&load_config(&cfg, Some(&data))?, workload.as_deref(), &out),
        Command::Serve {
            cfg,
            data,
            bundle,
            queries,
            filters,
            out,
        } => cmd_serve(&load_config(&cfg, Some(&data))?, &bundle, &queries, &filters, out.as_deref()),
        Command::Bench { cfg, out } => cmd_bench(&load_config(&cfg, None)?, out.as_deref()),
        Command::Refit {
            cfg,
            data,
            bundle,
            workload,
            out,
        } => cmd_refit(&load_config(&cfg, Some(&data))?, &bundle, &workload, out.as_deref()),
        Command::Gen { cfg, out } => cmd_gen(&load_config(&cfg, None)?, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
