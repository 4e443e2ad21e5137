//! Tunable retrieval parameters.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::HierarchicalIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Dot,
    #[default]
    Cosine,
    NegL1,
}

/// Which scoring rule ranks images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Global query vector against the whole-image vector only.
    Single,
    /// Global term plus per-sub-query maxima at one fixed level.
    FlatMvr,
    /// Per-sub-query maxima taken across a set of levels.
    #[default]
    Hierarchical,
}

/// How per-sub-query maxima are combined into one image score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Product,
    /// Sum of logarithms, each factor floored at [`LOG_SUM_FLOOR`].
    LogSum,
}

pub const LOG_SUM_FLOOR: f64 = 1e-9;

/// Parameters of one retrieval run.
///
/// `levels` holds segment counts. An empty list means "every level of the
/// index" and is expanded by [`SchedulerConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Initial reduction ratio.
    #[serde(rename = "T", default = "one")]
    pub t: f64,
    /// Decay rate of the reduction ratio.
    #[serde(default = "one")]
    pub alpha: f64,
    /// Early-exit threshold on Kendall's tau; `None` disables early exit.
    #[serde(default, with = "tau_serde")]
    pub tau: Option<f64>,
    #[serde(default)]
    pub levels: Vec<usize>,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub include_global_additive: bool,
    #[serde(default)]
    pub similarity: SimilarityKind,
}

fn one() -> f64 {
    1.0
}

fn default_k() -> usize {
    10
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            t: 1.0,
            alpha: 1.0,
            tau: None,
            levels: Vec::new(),
            k: default_k(),
            mode: Mode::default(),
            aggregation: Aggregation::default(),
            include_global_additive: false,
            similarity: SimilarityKind::default(),
        }
    }
}

impl SchedulerConfig {
    /// Exhaustive scoring: no pruning and no early exit.
    pub fn exhaustive(mut self) -> Self {
        self.t = 1.0;
        self.alpha = 1.0;
        self.tau = None;
        self
    }

    pub fn pruning_enabled(&self) -> bool {
        self.t < 1.0 || self.alpha < 1.0
    }

    /// Checks parameter ranges and returns a copy whose `levels` are sorted,
    /// de-duplicated and present in `index`. Mode `single` always resolves to
    /// the whole-image level; `flat_mvr` requires exactly one level.
    pub fn resolve(&self, index: &HierarchicalIndex) -> Result<SchedulerConfig> {
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::Config(format!(
                "T must lie in (0, 1], got {}",
                self.t
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if let Some(tau) = self.tau {
            if !(-1.0..=1.0).contains(&tau) {
                return Err(Error::Config(format!("tau must lie in [-1, 1], got {tau}")));
            }
        }
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }

        let mut levels = if self.levels.is_empty() {
            match self.mode {
                Mode::FlatMvr => {
                    return Err(Error::Config("flat_mvr needs exactly one level".into()))
                }
                _ => index.levels().to_vec(),
            }
        } else {
            self.levels.clone()
        };
        levels.sort_unstable();
        levels.dedup();
        for &n in &levels {
            if index.level_position(n).is_none() {
                return Err(Error::MissingLevel(n));
            }
        }
        match self.mode {
            Mode::Single => levels = vec![1],
            Mode::FlatMvr if levels.len() != 1 => {
                return Err(Error::Config(format!(
                    "flat_mvr needs exactly one level, got {levels:?}"
                )))
            }
            _ => {}
        }
        Ok(SchedulerConfig {
            levels,
            ..self.clone()
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTau {
    Number(f64),
    Text(String),
}

fn tau_from_raw<E: serde::de::Error>(raw: Option<RawTau>) -> Result<Option<f64>, E> {
    match raw {
        None => Ok(None),
        Some(RawTau::Number(v)) => Ok(Some(v)),
        Some(RawTau::Text(t)) if t == "disabled" => Ok(None),
        Some(RawTau::Text(t)) => Err(E::custom(format!(
            "tau must be a number or \"disabled\", got {t:?}"
        ))),
    }
}

/// `tau` as a number, `null` or `"disabled"`; written back as a number or
/// `"disabled"`.
pub(crate) mod tau_serde {
    use super::*;

    pub fn serialize<S: Serializer>(tau: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match tau {
            Some(v) => s.serialize_f64(*v),
            None => s.serialize_str("disabled"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        tau_from_raw(Option::<RawTau>::deserialize(d)?)
    }
}

/// A list of `tau` values in the same notation as [`tau_serde`].
pub(crate) mod tau_list {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(taus: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(taus.len()))?;
        for tau in taus {
            match tau {
                Some(v) => seq.serialize_element(v)?,
                None => seq.serialize_element("disabled")?,
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<f64>>, D::Error> {
        Vec::<Option<RawTau>>::deserialize(d)?
            .into_iter()
            .map(tau_from_raw)
            .collect()
    }
}
