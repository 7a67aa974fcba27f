//! Dataset ingestion, synthetic workloads, ground truth and benchmarks.

pub mod bench;
pub mod config;
pub mod gen;
pub mod io;
pub mod truth;

pub use bench::{prepare, run_bench, run_prepared, BenchReport, BenchRow, BuildSummary, Workbench};
pub use config::BenchConfig;
pub use gen::{gaussian_vectors, gen_attributes, gen_workload, AttrRecipe, WorkloadRecipe, WorkloadSpec};
pub use io::{ingest, read_fvecs, write_fvecs, Matrix, VectorFormat};
pub use truth::{ground_truth, ground_truth_cached, GroundTruth};
