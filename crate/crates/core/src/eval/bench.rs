use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{run_queries, QueryOutcome};
use crate::config::SchedulerConfig;
use crate::error::{Error, Result};
use crate::model::{DecomposedQuery, HierarchicalIndex, RankedResult};
use crate::scheduler::Scheduler;

/// Wall-clock throughput of repeated runs over a query set. Query
/// decomposition and embedding are not part of the measured work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub queries: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub workers: usize,
    pub qps: f64,
    pub mean_query_ms: f64,
    /// Ranking, cutting and tau computation per query.
    pub mean_overhead_ms: f64,
    pub max_overhead_ms: f64,
    pub mean_pairs_scored: f64,
    pub mean_global_pairs: f64,
    /// Results of the last measured iteration.
    #[serde(skip)]
    pub results: Vec<RankedResult>,
}

pub fn bench(
    index: &HierarchicalIndex,
    queries: &[DecomposedQuery],
    config: &SchedulerConfig,
    warmup: usize,
    iterations: usize,
) -> Result<BenchReport> {
    if iterations == 0 {
        return Err(Error::Config("bench needs at least one iteration".into()));
    }
    let scheduler = Scheduler::new(index, config)?;
    for _ in 0..warmup {
        run_queries(&scheduler, queries)?;
    }

    let mut elapsed = 0.0;
    let mut overhead_sum = 0.0;
    let mut overhead_max: f64 = 0.0;
    let mut pairs = 0.0;
    let mut global = 0.0;
    let mut last: Vec<QueryOutcome> = Vec::new();
    for _ in 0..iterations {
        let started = Instant::now();
        let outcomes = run_queries(&scheduler, queries)?;
        elapsed += started.elapsed().as_secs_f64();
        for o in &outcomes {
            overhead_sum += o.overhead_ms;
            overhead_max = overhead_max.max(o.overhead_ms);
            pairs += o.pairs_scored as f64;
            global += o.global_pairs as f64;
        }
        last = outcomes;
    }

    let total = (iterations * queries.len()) as f64;
    let per = |x: f64| if total > 0.0 { x / total } else { 0.0 };
    Ok(BenchReport {
        queries: queries.len(),
        warmup,
        iterations,
        workers: rayon::current_num_threads(),
        qps: if elapsed > 0.0 { total / elapsed } else { 0.0 },
        mean_query_ms: per(elapsed * 1e3),
        mean_overhead_ms: per(overhead_sum),
        max_overhead_ms: overhead_max,
        mean_pairs_scored: per(pairs),
        mean_global_pairs: per(global),
        results: last.into_iter().map(|o| o.result).collect(),
    })
}
