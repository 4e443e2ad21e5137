use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::PruneSchedule;

/// Which schedule ratio multiplies the level at 1-based position `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TConvention {
    /// `t_p`, the fraction kept after the level.
    #[default]
    AsPrinted,
    /// `t_{p-1}`, the fraction that enters the level and gets scored there.
    SurvivorsEntering,
}

/// Abstract cost of one query: `N_q * sum_g N_g * t_g * N_D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    /// Sub-queries per query (a dataset mean).
    pub n_q: f64,
    pub n_images: usize,
    /// Segment count per level.
    pub levels: Vec<usize>,
    /// One ratio per level.
    pub ratios: Vec<f64>,
}

impl LatencyModel {
    pub fn new(n_q: f64, n_images: usize, levels: Vec<usize>, ratios: Vec<f64>) -> Result<Self> {
        if levels.len() != ratios.len() {
            return Err(Error::Config(format!(
                "{} levels but {} ratios",
                levels.len(),
                ratios.len()
            )));
        }
        if !(n_q > 0.0 && n_q.is_finite()) {
            return Err(Error::Config(format!("N_q must be positive, got {n_q}")));
        }
        if levels.is_empty() || levels.contains(&0) {
            return Err(Error::Config(format!(
                "levels must be positive, got {levels:?}"
            )));
        }
        if let Some(t) = ratios.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("ratio {t} outside (0, 1]")));
        }
        Ok(Self {
            n_q,
            n_images,
            levels,
            ratios,
        })
    }

    /// Ratios taken from `schedule` for `levels` in order.
    pub fn from_schedule(
        n_q: f64,
        n_images: usize,
        levels: &[usize],
        schedule: &PruneSchedule,
        convention: TConvention,
    ) -> Result<Self> {
        let ratios = (1..=levels.len())
            .map(|p| match convention {
                TConvention::AsPrinted => schedule.ratio(p),
                TConvention::SurvivorsEntering => schedule.ratio(p - 1),
            })
            .collect();
        Self::new(n_q, n_images, levels.to_vec(), ratios)
    }

    pub fn predict(&self) -> f64 {
        let n_d = self.n_images as f64;
        let sum: f64 = self
            .levels
            .iter()
            .zip(&self.ratios)
            .map(|(&n_g, &t)| n_g as f64 * t * n_d)
            .sum();
        self.n_q * sum
    }
}

pub fn predict_latency(model: &LatencyModel) -> f64 {
    model.predict()
}
