//! Offline selection of the level set and of the pruning and early-exit
//! parameters under latency budgets.

mod latency;
mod set_gran;

pub use latency::{predict_latency, LatencyModel, TConvention};
pub use set_gran::{growth_levels, set_gran, GranEvent, SetGranOutcome, SetGranParams};

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{tau_list, Mode, SchedulerConfig};
use crate::error::{Error, Result};
use crate::eval::{ground_truth, ndcg_for_rank, run_queries};
use crate::model::{DecomposedQuery, HierarchicalIndex};
use crate::scheduler::{PruneSchedule, Scheduler};

/// Accuracy of a configuration on some labelled query set.
pub trait AccuracyEvaluator: Sync {
    fn accuracy(&self, config: &SchedulerConfig) -> Result<f64>;
}

/// Mean NDCG@10 over dev queries.
pub struct NdcgEvaluator<'a> {
    index: &'a HierarchicalIndex,
    queries: &'a [DecomposedQuery],
    truths: Vec<String>,
}

impl<'a> NdcgEvaluator<'a> {
    pub fn new(index: &'a HierarchicalIndex, queries: &'a [DecomposedQuery]) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::EmptyDevSet);
        }
        let truths = queries
            .iter()
            .map(|q| ground_truth(q, index))
            .collect::<Result<_>>()?;
        Ok(Self {
            index,
            queries,
            truths,
        })
    }
}

impl AccuracyEvaluator for NdcgEvaluator<'_> {
    fn accuracy(&self, config: &SchedulerConfig) -> Result<f64> {
        let scheduler = Scheduler::new(self.index, config)?;
        let outcomes = run_queries(&scheduler, self.queries)?;
        let sum: f64 = outcomes
            .iter()
            .zip(&self.truths)
            .map(|(o, gt)| match o.result.rank_of(gt) {
                Some(r) if r <= 10 => ndcg_for_rank(r),
                _ => 0.0,
            })
            .sum();
        Ok(sum / self.queries.len() as f64)
    }
}

/// Value lists searched by [`configure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRanges {
    #[serde(rename = "tau", with = "tau_list")]
    pub taus: Vec<Option<f64>>,
    #[serde(rename = "stride")]
    pub strides: Vec<usize>,
    #[serde(rename = "alpha")]
    pub alphas: Vec<f64>,
    #[serde(rename = "T")]
    pub ts: Vec<f64>,
    /// Strictly ascending.
    pub budgets: Vec<f64>,
}

impl SearchRanges {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("tau", self.taus.is_empty()),
            ("stride", self.strides.is_empty()),
            ("alpha", self.alphas.is_empty()),
            ("T", self.ts.is_empty()),
            ("budgets", self.budgets.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("search range {name} is empty")));
        }
        if self.strides.contains(&0) {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if self.budgets.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("budgets must be finite".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "budgets must be strictly ascending, got {:?}",
                self.budgets
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutotuneOptions {
    pub set_gran: SetGranParams,
    pub convention: TConvention,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: SchedulerConfig,
    pub accuracy: f64,
    pub predicted_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub budget: f64,
    pub config: Option<SchedulerConfig>,
    pub accuracy: Option<f64>,
    pub predicted_latency: Option<f64>,
}

/// Best configuration per budget, in ascending budget order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigTable {
    pub entries: Vec<ConfigEntry>,
}

impl ConfigTable {
    /// The entry for the largest budget not above `budget` that has a config.
    pub fn for_budget(&self, budget: f64) -> Option<&ConfigEntry> {
        self.entries
            .iter()
            .rev()
            .filter(|e| e.budget <= budget)
            .find(|e| e.config.is_some())
    }
}

/// Higher accuracy, then lower latency, then earlier grid position.
fn preference(a: &(usize, &GridPoint), b: &(usize, &GridPoint)) -> Ordering {
    a.1.accuracy
        .total_cmp(&b.1.accuracy)
        .then(b.1.predicted_latency.total_cmp(&a.1.predicted_latency))
        .then(b.0.cmp(&a.0))
}

/// For each budget, the preferred point whose latency fits.
pub fn build_table(points: &[GridPoint], budgets: &[f64]) -> ConfigTable {
    let entries = budgets
        .iter()
        .map(|&budget| {
            let best = points
                .iter()
                .enumerate()
                .filter(|(_, p)| p.predicted_latency <= budget)
                .max_by(preference);
            ConfigEntry {
                budget,
                config: best.map(|(_, p)| p.config.clone()),
                accuracy: best.map(|(_, p)| p.accuracy),
                predicted_latency: best.map(|(_, p)| p.predicted_latency),
            }
        })
        .collect();
    ConfigTable { entries }
}

/// Runs [`set_gran`] and the latency model at every grid point, in the
/// order stride, tau, alpha, T. Strides that reach fewer than two index
/// levels are skipped.
pub fn evaluate_grid(
    ranges: &SearchRanges,
    index: &HierarchicalIndex,
    dev_queries: &[DecomposedQuery],
    base: &SchedulerConfig,
    evaluator: &dyn AccuracyEvaluator,
    options: &AutotuneOptions,
) -> Result<Vec<GridPoint>> {
    ranges.validate()?;
    if dev_queries.is_empty() {
        return Err(Error::EmptyDevSet);
    }
    if base.mode != Mode::Hierarchical {
        return Err(Error::Config("autotune needs mode hierarchical".into()));
    }
    let n_q =
        dev_queries.iter().map(|q| q.subs.len() as f64).sum::<f64>() / dev_queries.len() as f64;

    let mut grid = Vec::new();
    for &stride in &ranges.strides {
        if growth_levels(index.levels(), stride).len() < 2 {
            continue;
        }
        for &tau in &ranges.taus {
            for &alpha in &ranges.alphas {
                for &t in &ranges.ts {
                    grid.push((stride, tau, alpha, t));
                }
            }
        }
    }

    grid.par_iter()
        .map(|&(stride, tau, alpha, t)| {
            let schedule = PruneSchedule::new(t, alpha)?;
            let cfg = SchedulerConfig {
                t,
                alpha,
                tau,
                ..base.clone()
            };
            let out = set_gran(index.levels(), stride, &cfg, evaluator, &options.set_gran)?;
            let model = LatencyModel::from_schedule(
                n_q,
                index.len(),
                &out.levels,
                &schedule,
                options.convention,
            )?;
            Ok(GridPoint {
                config: SchedulerConfig {
                    levels: out.levels,
                    ..cfg
                },
                accuracy: out.accuracy,
                predicted_latency: model.predict(),
            })
        })
        .collect()
}

pub fn configure(
    ranges: &SearchRanges,
    index: &HierarchicalIndex,
    dev_queries: &[DecomposedQuery],
    base: &SchedulerConfig,
    evaluator: &dyn AccuracyEvaluator,
    options: &AutotuneOptions,
) -> Result<ConfigTable> {
    let points = evaluate_grid(ranges, index, dev_queries, base, evaluator, options)?;
    Ok(build_table(&points, &ranges.budgets))
}
