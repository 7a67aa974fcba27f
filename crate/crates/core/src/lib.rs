//! Filtered vector search over a memory-budgeted collection of graph
//! subindexes fitted to a query-filter workload.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the width for common use.

pub mod costmodel;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod hnsw;
pub mod knn;
pub mod optimizer;
pub mod order;
pub mod predicate;
pub mod scalar;
pub mod serving;

pub use costmodel::{
    brute_cost, calibrate_gamma, index_model_size, indexed_cost, m_downscale, query_cost,
    sef_downscale, CostParams, QueryCost, Strategy,
};
pub use dataset::{bitmap, cardinality, AttributeIndex, AttributedDataset};
pub use distance::Metric;
pub use error::{Error, Result};
pub use hnsw::{HnswGraph, HnswParams, SearchStats};
pub use knn::{brute_force_knn, SearchResult};
pub use predicate::{
    evaluate, subsumes_bitmap, subsumes_logical, subsumes_structural, AttributeSet, Bitmap, FilterExpr,
    LogicalTest, SubsumptionMode,
};
pub use scalar::Scalar;
pub use serving::{BuildOptions, IndexCollection, PlanStrategy, ServingPlan};

pub type Dataset = AttributedDataset<f32>;
pub type Dataset64 = AttributedDataset<f64>;
pub type Params = CostParams<f32>;
pub type Params64 = CostParams<f64>;
pub type Results = SearchResult<f32>;
pub type Results64 = SearchResult<f64>;
pub type Collection = IndexCollection<f32>;
pub type Collection64 = IndexCollection<f64>;
