//! Per-level analyses over a query sample, with pruning and early exit off:
//! where the ground truth ranks after each level, which level holds each
//! sub-query's best match, and how stable consecutive top-K lists are.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ground_truth, ndcg_for_rank};
use crate::config::{Mode, SchedulerConfig};
use crate::error::Result;
use crate::model::{DecomposedQuery, HierarchicalIndex};
use crate::scheduler::Scheduler;
use crate::scoring::{aggregate, rank_order, score_flat_mvr, score_single, similarity};

/// Ground-truth rank counts in disjoint buckets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub rank_1: usize,
    pub rank_2_5: usize,
    pub rank_6_10: usize,
    pub rank_11_50: usize,
    pub rank_51_100: usize,
    pub rank_over_100: usize,
}

impl RankHistogram {
    fn add(&mut self, rank: usize) {
        match rank {
            1 => self.rank_1 += 1,
            2..=5 => self.rank_2_5 += 1,
            6..=10 => self.rank_6_10 += 1,
            11..=50 => self.rank_11_50 += 1,
            51..=100 => self.rank_51_100 += 1,
            _ => self.rank_over_100 += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    /// Segment count of the level.
    pub level: usize,
    /// Mean ground-truth rank using every level up to and including this one.
    pub mean_gt_rank: f64,
    pub rank_histogram: RankHistogram,
    pub recall_at_10: f64,
    pub ndcg_at_10: f64,
    /// NDCG@10 of flat multi-vector scoring at this level alone.
    pub flat_ndcg_at_10: f64,
    /// Mean tau between this level's top-K and the previous level's.
    pub mean_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sample_size: usize,
    pub levels: Vec<LevelDiagnostics>,
    /// Sub-queries whose best ground-truth match lies at each level (ties
    /// go to the coarser level).
    pub best_match_histogram: BTreeMap<usize, usize>,
}

struct QueryDiag {
    ranks: Vec<usize>,
    flat_ranks: Vec<usize>,
    taus: Vec<Option<f64>>,
    best_levels: Vec<usize>,
}

fn rank_in(scores: &[f64], target: usize) -> usize {
    let key = (target, scores[target]);
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| rank_order((j, s), key).is_lt())
        .count()
}

pub fn diagnose(
    index: &HierarchicalIndex,
    queries: &[DecomposedQuery],
    config: &SchedulerConfig,
) -> Result<Diagnostics> {
    let mut cfg = config.clone().exhaustive();
    if cfg.mode != Mode::Hierarchical {
        cfg.mode = Mode::Hierarchical;
        cfg.levels = Vec::new();
        cfg.include_global_additive = false;
    }
    let scheduler = Scheduler::new(index, &cfg)?;
    let cfg = scheduler.config().clone();
    let positions: Vec<usize> = cfg
        .levels
        .iter()
        .map(|&n| index.level_position(n).expect("resolved level"))
        .collect();

    let per_query: Vec<QueryDiag> = queries
        .par_iter()
        .map(|q| -> Result<QueryDiag> {
            let gt = index
                .position_of(&ground_truth(q, index)?)
                .expect("checked");
            let (_, state) = scheduler.process_traced(q)?;
            let global = if cfg.include_global_additive {
                Some(score_single(q, index, cfg.similarity)?)
            } else {
                None
            };
            let ranks = state
                .trace
                .iter()
                .map(|t| {
                    let scores: Vec<f64> = (0..index.len())
                        .map(|i| {
                            let s = aggregate(t.scores.row(i), cfg.aggregation);
                            global.as_ref().map_or(s, |g| g[i] + s)
                        })
                        .collect();
                    rank_in(&scores, gt)
                })
                .collect();
            let flat_ranks = cfg
                .levels
                .iter()
                .map(|&n| Ok(rank_in(&score_flat_mvr(q, index, cfg.similarity, n)?, gt)))
                .collect::<Result<_>>()?;
            let best_levels = q
                .subs
                .iter()
                .map(|sub| {
                    let mut best = (f64::NEG_INFINITY, cfg.levels[0]);
                    for (&g, &n) in positions.iter().zip(&cfg.levels) {
                        let m = index
                            .segments(gt, g)
                            .map(|seg| similarity(sub, seg, cfg.similarity))
                            .fold(f64::NEG_INFINITY, f64::max);
                        if m > best.0 {
                            best = (m, n);
                        }
                    }
                    best.1
                })
                .collect();
            Ok(QueryDiag {
                ranks,
                flat_ranks,
                taus: state.taus,
                best_levels,
            })
        })
        .collect::<Result<_>>()?;

    let n = per_query.len().max(1) as f64;
    let mut levels = Vec::with_capacity(cfg.levels.len());
    for (p, &level) in cfg.levels.iter().enumerate() {
        let mut hist = RankHistogram::default();
        let (mut rank_sum, mut recall, mut ndcg, mut flat) = (0.0, 0.0, 0.0, 0.0);
        let (mut tau_sum, mut tau_n) = (0.0, 0usize);
        for d in &per_query {
            let r = d.ranks[p];
            hist.add(r);
            rank_sum += r as f64;
            if r <= 10 {
                recall += 1.0;
                ndcg += ndcg_for_rank(r);
            }
            if d.flat_ranks[p] <= 10 {
                flat += ndcg_for_rank(d.flat_ranks[p]);
            }
            if let Some(t) = d.taus[p] {
                tau_sum += t;
                tau_n += 1;
            }
        }
        levels.push(LevelDiagnostics {
            level,
            mean_gt_rank: rank_sum / n,
            rank_histogram: hist,
            recall_at_10: recall / n,
            ndcg_at_10: ndcg / n,
            flat_ndcg_at_10: flat / n,
            mean_tau: (tau_n > 0).then(|| tau_sum / tau_n as f64),
        });
    }

    let mut best_match_histogram: BTreeMap<usize, usize> =
        cfg.levels.iter().map(|&l| (l, 0)).collect();
    for d in &per_query {
        for &l in &d.best_levels {
            *best_match_histogram.entry(l).or_insert(0) += 1;
        }
    }

    Ok(Diagnostics {
        sample_size: per_query.len(),
        levels,
        best_match_histogram,
    })
}

/// One row per level: `level,mean_gt_rank,recall_at_10,mean_tau,ndcg_at_10,flat_ndcg_at_10`.
/// `mean_tau` is empty for the first level.
pub fn profile_csv(diag: &Diagnostics) -> String {
    let mut out =
        String::from("level,mean_gt_rank,recall_at_10,mean_tau,ndcg_at_10,flat_ndcg_at_10\n");
    for l in &diag.levels {
        let tau = l.mean_tau.map(|t| format!("{t:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:.6},{:.6},{},{:.6},{:.6}",
            l.level, l.mean_gt_rank, l.recall_at_10, tau, l.ndcg_at_10, l.flat_ndcg_at_10
        )
        .expect("writing to a String");
    }
    out
}
