//! Hierarchical multi-vector image retrieval.
//!
//! Queries are decomposed into sub-query embeddings and matched against image
//! segment embeddings at several granularities. The crate provides:
//!
//! - [`model`]: the index, queries and the on-disk container format
//! - [`scoring`]: single-vector, flat multi-vector and hierarchical scoring
//! - [`scheduler`]: level-by-level processing with candidate pruning and
//!   Kendall-tau early exit
//! - [`autotune`]: granularity selection and latency-budgeted grid search
//! - [`eval`]: NDCG/recall metrics, diagnostics and throughput measurement
//! - [`synth`]: planted synthetic datasets

pub mod autotune;
pub mod config;
pub mod error;
pub mod eval;
pub mod model;
pub mod scheduler;
pub mod scoring;
pub mod synth;

pub use config::{Aggregation, Mode, SchedulerConfig, SimilarityKind};
pub use error::{Error, Result};
pub use model::{DecomposedQuery, HierarchicalIndex, Hit, ImageRecord, RankedResult};
pub use scheduler::{process_query, PruneSchedule, QueryState, Scheduler};
