//! Level-by-level query processing with candidate pruning and early exit.
//!
//! Levels are visited in ascending segment count. At each level only the
//! current survivors are scored; their running per-sub-query maxima are
//! aggregated, the survivors are ranked and cut to `floor(N_D * t_p)`
//! (never below `K`), and the first `K` form that level's top-K. Processing
//! stops early once Kendall's tau between consecutive top-K lists reaches the
//! configured threshold.

mod kendall;
mod schedule;

pub use kendall::{aligned_ranks, kendall_tau, tau_from_ranks};
pub use schedule::PruneSchedule;

use std::time::{Duration, Instant};

use crate::config::{Aggregation, Mode, SchedulerConfig};
use crate::error::Result;
use crate::model::{DecomposedQuery, HierarchicalIndex, Hit, RankedResult};
use crate::scoring::{aggregate, rank_order, similarity};

/// Running best similarity per (image, sub-query); `-inf` until scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_subs: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    fn new(n_images: usize, n_subs: usize) -> Self {
        Self {
            n_subs,
            values: vec![f64::NEG_INFINITY; n_images * n_subs],
        }
    }

    pub fn n_subs(&self) -> usize {
        self.n_subs
    }

    pub fn row(&self, image: usize) -> &[f64] {
        &self.values[image * self.n_subs..(image + 1) * self.n_subs]
    }

    fn row_mut(&mut self, image: usize) -> &mut [f64] {
        &mut self.values[image * self.n_subs..(image + 1) * self.n_subs]
    }
}

/// Per-level record kept when tracing is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTrace {
    pub level: usize,
    /// Image positions kept after this level, in rank order.
    pub survivors: Vec<usize>,
    /// Snapshot of the score matrix after this level.
    pub scores: ScoreMatrix,
}

/// Bookkeeping of one processed query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState {
    pub score_matrix: ScoreMatrix,
    /// Surviving image positions after the last processed level, in rank order.
    pub survivors: Vec<usize>,
    /// Segment counts of the processed levels.
    pub processed_levels: Vec<usize>,
    /// Number of images scored at each processed level.
    pub entering: Vec<usize>,
    /// Top-K image positions after each processed level.
    pub topk_history: Vec<Vec<usize>>,
    /// Tau against the previous level's top-K, per processed level.
    pub taus: Vec<Option<f64>>,
    /// Level at which early exit fired.
    pub exit_level: Option<usize>,
    /// (sub-query, segment) similarity evaluations.
    pub pairs_scored: u64,
    /// Global-query similarity evaluations.
    pub global_pairs: u64,
    /// Time spent ranking, cutting and computing tau.
    pub overhead: Duration,
    /// Some scored per-sub-query maximum was negative.
    pub negative_best: bool,
    pub trace: Vec<LevelTrace>,
}

impl QueryState {
    pub fn final_level(&self) -> Option<usize> {
        self.processed_levels.last().copied()
    }
}

/// A configuration resolved and checked against one index, reusable across
/// queries.
#[derive(Debug, Clone)]
pub struct Scheduler<'a> {
    index: &'a HierarchicalIndex,
    config: SchedulerConfig,
    positions: Vec<usize>,
    schedule: PruneSchedule,
}

impl<'a> Scheduler<'a> {
    pub fn new(index: &'a HierarchicalIndex, config: &SchedulerConfig) -> Result<Self> {
        let config = config.resolve(index)?;
        let positions = config
            .levels
            .iter()
            .map(|&n| index.level_position(n).expect("resolved level"))
            .collect();
        let schedule = PruneSchedule::new(config.t, config.alpha)?;
        Ok(Self {
            index,
            config,
            positions,
            schedule,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn schedule(&self) -> PruneSchedule {
        self.schedule
    }

    pub fn process(&self, query: &DecomposedQuery) -> Result<(RankedResult, QueryState)> {
        self.run(query, false)
    }

    /// Like [`Scheduler::process`], also recording per-level survivors and
    /// score snapshots.
    pub fn process_traced(&self, query: &DecomposedQuery) -> Result<(RankedResult, QueryState)> {
        self.run(query, true)
    }

    fn run(&self, query: &DecomposedQuery, trace: bool) -> Result<(RankedResult, QueryState)> {
        let index = self.index;
        query.validate(index.dim())?;
        let cfg = &self.config;
        let kind = cfg.similarity;
        let n_images = index.len();

        let (n_subs, aggregation, with_global) = match cfg.mode {
            Mode::Single => (0, Aggregation::Product, true),
            Mode::FlatMvr => (query.subs.len(), Aggregation::Product, true),
            Mode::Hierarchical => (
                query.subs.len(),
                cfg.aggregation,
                cfg.include_global_additive,
            ),
        };

        let mut state = QueryState {
            score_matrix: ScoreMatrix::new(n_images, n_subs),
            survivors: (0..n_images).collect(),
            processed_levels: Vec::new(),
            entering: Vec::new(),
            topk_history: Vec::new(),
            taus: Vec::new(),
            exit_level: None,
            pairs_scored: 0,
            global_pairs: 0,
            overhead: Duration::ZERO,
            negative_best: false,
            trace: Vec::new(),
        };

        let global: Vec<f64> = if with_global {
            state.global_pairs = n_images as u64;
            (0..n_images)
                .map(|i| similarity(&query.global, index.whole_image(i), kind))
                .collect()
        } else {
            Vec::new()
        };

        let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(n_images);
        for (p, (&level_pos, &n_g)) in self.positions.iter().zip(&cfg.levels).enumerate() {
            let entering = state.survivors.len();
            if cfg.mode != Mode::Single {
                for &i in &state.survivors {
                    let row = state.score_matrix.row_mut(i);
                    for (best, sub) in row.iter_mut().zip(&query.subs) {
                        for seg in index.segments(i, level_pos) {
                            *best = best.max(similarity(sub, seg, kind));
                        }
                    }
                }
                state.pairs_scored += (n_subs * n_g * entering) as u64;
            }

            ranked.clear();
            ranked.extend(state.survivors.iter().map(|&i| {
                let s = if n_subs == 0 {
                    global[i]
                } else if with_global {
                    global[i] + aggregate(state.score_matrix.row(i), aggregation)
                } else {
                    aggregate(state.score_matrix.row(i), aggregation)
                };
                (i, s)
            }));

            let started = Instant::now();
            let keep = self
                .schedule
                .survivor_count(p + 1, n_images, cfg.k)
                .min(entering);
            if keep < ranked.len() {
                if keep > 0 {
                    ranked.select_nth_unstable_by(keep - 1, |&a, &b| rank_order(a, b));
                }
                ranked.truncate(keep);
            }
            ranked.sort_unstable_by(|&a, &b| rank_order(a, b));
            state.survivors.clear();
            state.survivors.extend(ranked.iter().map(|&(i, _)| i));
            let topk: Vec<usize> = state.survivors.iter().take(cfg.k).copied().collect();

            let tau = state
                .topk_history
                .last()
                .map(|prev| kendall_tau(&topk, prev));
            state.overhead += started.elapsed();

            state.processed_levels.push(n_g);
            state.entering.push(entering);
            state.topk_history.push(topk);
            state.taus.push(tau);
            if trace {
                state.trace.push(LevelTrace {
                    level: n_g,
                    survivors: state.survivors.clone(),
                    scores: state.score_matrix.clone(),
                });
            }

            if let (Some(tau), Some(threshold)) = (tau, cfg.tau) {
                if tau >= threshold {
                    state.exit_level = Some(n_g);
                    break;
                }
            }
        }

        state.negative_best = state
            .score_matrix
            .values
            .iter()
            .any(|&v| v.is_finite() && v < 0.0);

        let result = RankedResult {
            hits: ranked
                .iter()
                .take(cfg.k)
                .map(|&(i, score)| Hit {
                    id: index.image_id(i).to_string(),
                    score,
                })
                .collect(),
        };
        Ok((result, state))
    }
}

/// Runs one query under `config`. Reuse a [`Scheduler`] for many queries.
pub fn process_query(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    config: &SchedulerConfig,
) -> Result<(RankedResult, QueryState)> {
    Scheduler::new(index, config)?.process(query)
}
