//! The `--config` file: scheduler fields at the top level, plus optional
//! `ranges`, `set_gran`, `convention`, `budget`, `workers` and `diag_sample`.
//! An autotune table (a JSON array) is accepted too; the entry for the
//! selected budget supplies the scheduler fields.

use std::path::Path;

use hmvr::autotune::{ConfigTable, SearchRanges, SetGranParams, TConvention};
use hmvr::SchedulerConfig;
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub scheduler: SchedulerConfig,
    pub ranges: Option<SearchRanges>,
    pub set_gran: SetGranParams,
    pub convention: TConvention,
    pub budget: Option<f64>,
    pub workers: Option<usize>,
    pub diag_sample: Option<usize>,
}

fn take<T: serde::de::DeserializeOwned>(
    map: &mut serde_json::Map<String, Value>,
    key: &str,
    source: &str,
) -> CliResult<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| CliError::invalid(format!("{source}: field {key:?}: {e}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path, budget: Option<f64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, budget, &path.display().to_string())
    }

    /// `budget` picks the table entry for an autotune table and overrides the
    /// file's own `budget`.
    pub fn parse(text: &str, budget: Option<f64>, source: &str) -> CliResult<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::invalid(format!("{source}: {e}")))?;
        match value {
            Value::Array(_) => {
                let table: ConfigTable = serde_json::from_value(value)
                    .map_err(|e| CliError::invalid(format!("{source}: not a config table: {e}")))?;
                let budget = budget.unwrap_or(f64::INFINITY);
                let entry = table.for_budget(budget).ok_or_else(|| {
                    CliError::invalid(format!("{source}: no configuration fits budget {budget}"))
                })?;
                Ok(Self {
                    scheduler: entry
                        .config
                        .clone()
                        .expect("for_budget skips empty entries"),
                    budget: Some(entry.budget),
                    ..Default::default()
                })
            }
            Value::Object(mut map) => {
                let ranges = take(&mut map, "ranges", source)?;
                let set_gran = take(&mut map, "set_gran", source)?.unwrap_or_default();
                let convention = take(&mut map, "convention", source)?.unwrap_or_default();
                let file_budget = take(&mut map, "budget", source)?;
                let workers = take(&mut map, "workers", source)?;
                let diag_sample = take(&mut map, "diag_sample", source)?;
                let scheduler = serde_json::from_value(Value::Object(map))
                    .map_err(|e| CliError::invalid(format!("{source}: {e}")))?;
                Ok(Self {
                    scheduler,
                    ranges,
                    set_gran,
                    convention,
                    budget: budget.or(file_budget),
                    workers,
                    diag_sample,
                })
            }
            _ => Err(CliError::invalid(format!(
                "{source}: expected a JSON object or array"
            ))),
        }
    }
}
