//! Retrieval quality metrics, per-level diagnostics and throughput runs.

mod bench;
mod diagnostics;

pub use bench::{bench, BenchReport};
pub use diagnostics::{diagnose, profile_csv, Diagnostics, LevelDiagnostics, RankHistogram};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SchedulerConfig;
use crate::error::{Error, Result};
use crate::model::{DecomposedQuery, HierarchicalIndex, RankedResult};
use crate::scheduler::Scheduler;

/// NDCG@k with a single relevant item: `1 / log2(1 + rank)` when the item is
/// ranked within the first `k`, else 0.
pub fn ndcg_at_k(result: &RankedResult, ground_truth: &str, k: usize) -> f64 {
    match result.rank_of(ground_truth) {
        Some(rank) if rank <= k => ndcg_for_rank(rank),
        _ => 0.0,
    }
}

pub(crate) fn ndcg_for_rank(rank: usize) -> f64 {
    1.0 / ((1 + rank) as f64).log2()
}

/// 1.0 when the ground truth is within the first `k` results.
pub fn recall_at_k(result: &RankedResult, ground_truth: &str, k: usize) -> f64 {
    match result.rank_of(ground_truth) {
        Some(rank) if rank <= k => 1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub recall_ks: Vec<usize>,
    /// Run the per-level diagnostics.
    pub diagnostics: bool,
    /// Number of queries (taken from the front) the diagnostics look at.
    pub diag_sample: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            recall_ks: vec![1, 5, 10],
            diagnostics: false,
            diag_sample: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: usize,
    pub config: SchedulerConfig,
    pub ndcg_at_1: f64,
    pub ndcg_at_10: f64,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub qps: f64,
    pub workers: usize,
    pub mean_pairs_scored: f64,
    pub mean_global_pairs: f64,
    /// Queries per level at which processing stopped (keyed by segment count).
    pub exit_level_histogram: BTreeMap<usize, usize>,
    /// Mean 1-based position, within the configured levels, of the last
    /// processed level.
    pub mean_exit_position: f64,
    pub early_exits: usize,
    /// Queries where some per-sub-query maximum was negative.
    pub negative_best_queries: usize,
    pub mean_overhead_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

/// Outcome of one query under a scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub result: RankedResult,
    pub pairs_scored: u64,
    pub global_pairs: u64,
    pub final_level: Option<usize>,
    pub final_position: usize,
    pub exit_level: Option<usize>,
    pub negative_best: bool,
    pub overhead_ms: f64,
}

pub(crate) fn ground_truth(query: &DecomposedQuery, index: &HierarchicalIndex) -> Result<String> {
    let gt = query
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::query(&query.query_id, "missing ground truth"))?;
    if index.position_of(gt).is_none() {
        return Err(Error::query(
            &query.query_id,
            format!("ground truth {gt:?} is not in the index"),
        ));
    }
    Ok(gt.clone())
}

/// Runs every query in parallel; output order follows `queries`.
pub fn run_queries(
    scheduler: &Scheduler<'_>,
    queries: &[DecomposedQuery],
) -> Result<Vec<QueryOutcome>> {
    queries
        .par_iter()
        .map(|q| {
            let (result, state) = scheduler.process(q)?;
            Ok(QueryOutcome {
                result,
                pairs_scored: state.pairs_scored,
                global_pairs: state.global_pairs,
                final_level: state.final_level(),
                final_position: state.processed_levels.len(),
                exit_level: state.exit_level,
                negative_best: state.negative_best,
                overhead_ms: state.overhead.as_secs_f64() * 1e3,
            })
        })
        .collect()
}

/// Mean of per-query values, summed in query order.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn evaluate(
    index: &HierarchicalIndex,
    queries: &[DecomposedQuery],
    config: &SchedulerConfig,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let truths: Vec<String> = queries
        .iter()
        .map(|q| ground_truth(q, index))
        .collect::<Result<_>>()?;
    let scheduler = Scheduler::new(index, config)?;

    let started = Instant::now();
    let outcomes = run_queries(&scheduler, queries)?;
    let elapsed = started.elapsed().as_secs_f64();

    let n = queries.len();
    let mut recall = BTreeMap::new();
    for &k in &options.recall_ks {
        let r = mean(
            outcomes
                .iter()
                .zip(&truths)
                .map(|(o, gt)| recall_at_k(&o.result, gt, k)),
        );
        recall.insert(k, r);
    }
    let mut exit_level_histogram = BTreeMap::new();
    for o in &outcomes {
        if let Some(level) = o.final_level {
            *exit_level_histogram.entry(level).or_insert(0) += 1;
        }
    }

    let diagnostics = if options.diagnostics {
        let sample = n.min(options.diag_sample);
        Some(diagnose(index, &queries[..sample], config)?)
    } else {
        None
    };

    Ok(EvalReport {
        queries: n,
        config: scheduler.config().clone(),
        ndcg_at_1: mean(
            outcomes
                .iter()
                .zip(&truths)
                .map(|(o, gt)| ndcg_at_k(&o.result, gt, 1)),
        ),
        ndcg_at_10: mean(
            outcomes
                .iter()
                .zip(&truths)
                .map(|(o, gt)| ndcg_at_k(&o.result, gt, 10)),
        ),
        recall_at_k: recall,
        qps: if elapsed > 0.0 {
            n as f64 / elapsed
        } else {
            0.0
        },
        workers: rayon::current_num_threads(),
        mean_pairs_scored: mean(outcomes.iter().map(|o| o.pairs_scored as f64)),
        mean_global_pairs: mean(outcomes.iter().map(|o| o.global_pairs as f64)),
        exit_level_histogram,
        mean_exit_position: mean(outcomes.iter().map(|o| o.final_position as f64)),
        early_exits: outcomes.iter().filter(|o| o.exit_level.is_some()).count(),
        negative_best_queries: outcomes.iter().filter(|o| o.negative_best).count(),
        mean_overhead_ms: mean(outcomes.iter().map(|o| o.overhead_ms)),
        diagnostics,
    })
}
