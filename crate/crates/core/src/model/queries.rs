//! Query files: one JSON object per line,
//! `{"query_id":..,"global":[..],"subs":[[..],..],"ground_truth":..|null}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DecomposedQuery, HierarchicalIndex};
use crate::error::{Error, Result};

/// Reads and validates a query file against dimension `dim`.
pub fn load_queries(path: impl AsRef<Path>, dim: usize) -> Result<Vec<DecomposedQuery>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let q: DecomposedQuery = serde_json::from_str(&line).map_err(|e| {
            Error::query(
                &format!("<line {}>", lineno + 1),
                format!("malformed JSON: {e}"),
            )
        })?;
        q.validate(dim)?;
        out.push(q);
    }
    Ok(out)
}

pub fn save_queries(queries: &[DecomposedQuery], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for q in queries {
        serde_json::to_writer(&mut w, q).expect("query serializes");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Checks that every ground-truth id present in `queries` exists in `index`.
pub fn validate_ground_truth(queries: &[DecomposedQuery], index: &HierarchicalIndex) -> Result<()> {
    for q in queries {
        if let Some(gt) = &q.ground_truth {
            if index.position_of(gt).is_none() {
                return Err(Error::query(
                    &q.query_id,
                    format!("ground truth {gt:?} is not in the index"),
                ));
            }
        }
    }
    Ok(())
}
