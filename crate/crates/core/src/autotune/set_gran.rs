use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::AccuracyEvaluator;
use crate::config::SchedulerConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetGranParams {
    /// Growth stops once accuracy changes by less than this.
    pub eps_conv: f64,
    /// A removal is undone when accuracy falls to the converged value minus this or lower.
    pub eps_drop: f64,
    /// Growth never stops before this many levels.
    pub min_levels: usize,
}

impl Default for SetGranParams {
    fn default() -> Self {
        Self {
            eps_conv: 0.001,
            eps_drop: 0.001,
            min_levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GranEvent {
    Grow {
        level: usize,
        accuracy: f64,
    },
    Converged {
        levels: Vec<usize>,
        accuracy: f64,
    },
    Probe {
        without: usize,
        accuracy: f64,
    },
    Remove {
        level: usize,
        accuracy: f64,
    },
    /// The best allowed removal would fall to or below the bar; kept.
    Rollback {
        level: usize,
        accuracy: f64,
    },
    /// Every candidate neighbours the last removed level.
    Blocked,
    /// Two levels left.
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetGranOutcome {
    pub levels: Vec<usize>,
    /// Accuracy at the end of growth.
    pub converged_accuracy: f64,
    /// Accuracy of `levels`.
    pub accuracy: f64,
    pub trace: Vec<GranEvent>,
}

/// `1, 1 + stride, 1 + 2 * stride, ..` restricted to the available levels.
pub fn growth_levels(available: &[usize], stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut levels: Vec<usize> = available
        .iter()
        .copied()
        .filter(|&n| n >= 1 && (n - 1) % stride == 0)
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}

struct Memo<'e> {
    evaluator: &'e dyn AccuracyEvaluator,
    base: SchedulerConfig,
    seen: Mutex<HashMap<Vec<usize>, f64>>,
}

impl Memo<'_> {
    fn accuracy(&self, levels: &[usize]) -> Result<f64> {
        if let Some(&a) = self.seen.lock().expect("memo lock").get(levels) {
            return Ok(a);
        }
        let cfg = SchedulerConfig {
            levels: levels.to_vec(),
            ..self.base.clone()
        };
        let a = self.evaluator.accuracy(&cfg)?;
        if !a.is_finite() {
            return Err(Error::Evaluator(format!(
                "accuracy {a} for levels {levels:?}"
            )));
        }
        self.seen
            .lock()
            .expect("memo lock")
            .insert(levels.to_vec(), a);
        Ok(a)
    }
}

/// Builds a level set for fixed `tau`, `alpha` and `T` taken from `base`.
///
/// Growth appends `1, 1 + stride, ..` (only values present in `available`)
/// until accuracy changes by less than `eps_conv` with at least `min_levels`
/// levels, or the candidates run out. Pruning then repeatedly drops the level
/// whose removal keeps accuracy highest (ties drop the finer level), never a
/// neighbour of the level removed just before, and stops at two levels or
/// when the best removal would fall to `converged - eps_drop` or below.
pub fn set_gran(
    available: &[usize],
    stride: usize,
    base: &SchedulerConfig,
    evaluator: &dyn AccuracyEvaluator,
    params: &SetGranParams,
) -> Result<SetGranOutcome> {
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let candidates = growth_levels(available, stride);
    if candidates.first() != Some(&1) || candidates.len() < 2 {
        return Err(Error::Config(format!(
            "stride {stride} reaches fewer than two levels of {available:?}"
        )));
    }
    let memo = Memo {
        evaluator,
        base: base.clone(),
        seen: Mutex::new(HashMap::new()),
    };
    let mut trace = Vec::new();

    let mut levels: Vec<usize> = Vec::new();
    let mut prev: Option<f64> = None;
    let mut acc = f64::NAN;
    for &n in &candidates {
        levels.push(n);
        acc = memo.accuracy(&levels)?;
        trace.push(GranEvent::Grow {
            level: n,
            accuracy: acc,
        });
        if let Some(p) = prev {
            if levels.len() >= params.min_levels.max(2) && (acc - p).abs() < params.eps_conv {
                break;
            }
        }
        prev = Some(acc);
    }
    let converged = acc;
    trace.push(GranEvent::Converged {
        levels: levels.clone(),
        accuracy: converged,
    });

    let mut current = converged;
    let mut blocked: Vec<usize> = Vec::new();
    loop {
        if levels.len() <= 2 {
            trace.push(GranEvent::Floor);
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &n) in levels.iter().enumerate() {
            let mut rest = levels.clone();
            rest.remove(i);
            let a = memo.accuracy(&rest)?;
            trace.push(GranEvent::Probe {
                without: n,
                accuracy: a,
            });
            if blocked.contains(&n) {
                continue;
            }
            // later (finer) levels win ties
            if best.is_none_or(|(_, b)| a >= b) {
                best = Some((i, a));
            }
        }
        let Some((i, a)) = best else {
            trace.push(GranEvent::Blocked);
            break;
        };
        let level = levels[i];
        if a <= converged - params.eps_drop {
            trace.push(GranEvent::Rollback { level, accuracy: a });
            break;
        }
        blocked = [i.checked_sub(1), Some(i + 1)]
            .into_iter()
            .flatten()
            .filter_map(|j| levels.get(j).copied())
            .collect();
        levels.remove(i);
        current = a;
        trace.push(GranEvent::Remove { level, accuracy: a });
    }

    Ok(SetGranOutcome {
        levels,
        converged_accuracy: converged,
        accuracy: current,
        trace,
    })
}
