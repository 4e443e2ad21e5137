use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// absorbs representation error in n * t before flooring, e.g. 100.0 * 0.29
const FLOOR_SLACK: f64 = 1e-9;

/// Fraction of images kept after each processed level: `t_0 = 1` and
/// `t_p = alpha^p * T` for the level at 1-based position `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    t: f64,
    alpha: f64,
}

impl PruneSchedule {
    pub fn new(t: f64, alpha: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!("T must lie in (0, 1], got {t}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self { t, alpha })
    }

    /// No pruning at any level.
    pub fn identity() -> Self {
        Self { t: 1.0, alpha: 1.0 }
    }

    pub fn initial_ratio(&self) -> f64 {
        self.t
    }

    pub fn decay(&self) -> f64 {
        self.alpha
    }

    /// `t_p`; position 0 is the full image set.
    pub fn ratio(&self, position: usize) -> f64 {
        if position == 0 {
            1.0
        } else {
            self.alpha.powi(position as i32) * self.t
        }
    }

    /// `[t_1, .., t_n]`.
    pub fn ratios(&self, levels: usize) -> Vec<f64> {
        (1..=levels).map(|p| self.ratio(p)).collect()
    }

    /// Survivors kept after the level at `position`: `floor(n * t_p)` raised
    /// to at least `k`, never more than `n`.
    pub fn survivor_count(&self, position: usize, n_images: usize, k: usize) -> usize {
        let raw = (n_images as f64 * self.ratio(position) + FLOOR_SLACK).floor() as usize;
        raw.max(k).min(n_images)
    }
}
