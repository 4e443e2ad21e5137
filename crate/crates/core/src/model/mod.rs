//! Embedding data model: the hierarchical image index, decomposed queries and
//! ranked results.
//!
//! An index stores, for each image, one block of segment embeddings per
//! granularity level. Levels are identified by their segment count `N_g`; the
//! first level always has a single segment holding the whole-image embedding.

mod container;
mod queries;

pub use container::{load_index, save_index, MANIFEST_FILE, VECTORS_FILE};
pub use queries::{load_queries, save_queries, validate_ground_truth};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the L2 norm of vectors in an index declared as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

/// One image before it is placed in an index: per-level row-major segment
/// blocks, each `N_g * dim` values long.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub levels: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
struct ImageEntry {
    id: String,
    data: Vec<f32>,
}

/// All image segment embeddings, organized as images x levels x segments.
///
/// Images are kept in ascending id order, so position order and id order
/// coincide. The index is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalIndex {
    dim: usize,
    normalized: bool,
    levels: Vec<usize>,
    // row offset of each level inside an image's data block
    level_rows: Vec<usize>,
    rows_per_image: usize,
    images: Vec<ImageEntry>,
}

impl HierarchicalIndex {
    /// Builds and validates an index. Images may be given in any order.
    pub fn new(
        dim: usize,
        normalized: bool,
        levels: Vec<usize>,
        mut images: Vec<ImageRecord>,
    ) -> Result<Self> {
        validate_levels(dim, &levels)?;
        images.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in images.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Manifest(format!(
                    "duplicate image id {:?}",
                    pair[0].id
                )));
            }
        }

        let mut level_rows = Vec::with_capacity(levels.len());
        let mut rows = 0;
        for &n in &levels {
            level_rows.push(rows);
            rows += n;
        }

        let mut entries = Vec::with_capacity(images.len());
        for record in images {
            if record.levels.len() != levels.len() {
                return Err(Error::image(
                    &record.id,
                    levels.len(),
                    format!(
                        "expected {} levels, found {}",
                        levels.len(),
                        record.levels.len()
                    ),
                ));
            }
            let mut data = Vec::with_capacity(rows * dim);
            for (block, &n_g) in record.levels.iter().zip(&levels) {
                check_block(&record.id, n_g, dim, normalized, block)?;
                data.extend_from_slice(block);
            }
            entries.push(ImageEntry {
                id: record.id,
                data,
            });
        }

        Ok(Self {
            dim,
            normalized,
            levels,
            level_rows,
            rows_per_image: rows,
            images: entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Segment counts of all levels, ascending.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_id(&self, image: usize) -> &str {
        &self.images[image].id
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.images.iter().map(|e| e.id.as_str())
    }

    /// Position of an image id, using the sorted layout.
    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.images.binary_search_by(|e| e.id.as_str().cmp(id)).ok()
    }

    /// Position of the level with `n_g` segments.
    pub fn level_position(&self, n_g: usize) -> Option<usize> {
        self.levels.binary_search(&n_g).ok()
    }

    /// Row-major block of the `N_g` segments of `image` at level position `level`.
    pub fn level_block(&self, image: usize, level: usize) -> &[f32] {
        let start = self.level_rows[level] * self.dim;
        let len = self.levels[level] * self.dim;
        &self.images[image].data[start..start + len]
    }

    pub fn segments(&self, image: usize, level: usize) -> std::slice::ChunksExact<'_, f32> {
        self.level_block(image, level).chunks_exact(self.dim)
    }

    /// The single level-1 vector of an image.
    pub fn whole_image(&self, image: usize) -> &[f32] {
        &self.images[image].data[..self.dim]
    }

    /// Total vectors stored per image across all levels.
    pub fn rows_per_image(&self) -> usize {
        self.rows_per_image
    }
}

fn validate_levels(dim: usize, levels: &[usize]) -> Result<()> {
    if dim == 0 {
        return Err(Error::Manifest("dimension must be at least 1".into()));
    }
    if levels.first() != Some(&1) {
        return Err(Error::Manifest(
            "the first level must be the one-segment whole-image level".into(),
        ));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Manifest(format!(
            "level segment counts must be strictly increasing, got {levels:?}"
        )));
    }
    Ok(())
}

fn check_block(id: &str, n_g: usize, dim: usize, normalized: bool, block: &[f32]) -> Result<()> {
    if !block.len().is_multiple_of(dim) {
        return Err(Error::image(
            id,
            n_g,
            format!(
                "{} values is not a multiple of dimension {dim}",
                block.len()
            ),
        ));
    }
    let rows = block.len() / dim;
    if rows != n_g {
        return Err(Error::image(
            id,
            n_g,
            format!("expected {n_g} segments, found {rows}"),
        ));
    }
    for (j, row) in block.chunks_exact(dim).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::image(
                id,
                n_g,
                format!("segment {j} has a non-finite value"),
            ));
        }
        if normalized {
            let norm = l2_norm(row);
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::image(
                    id,
                    n_g,
                    format!("segment {j} has norm {norm:.6}, expected unit norm"),
                ));
            }
        }
    }
    Ok(())
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// A query split into one global embedding and `N_q >= 1` sub-query embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedQuery {
    pub query_id: String,
    pub global: Vec<f32>,
    pub subs: Vec<Vec<f32>>,
    #[serde(default)]
    pub ground_truth: Option<String>,
}

impl DecomposedQuery {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.subs.is_empty() {
            return Err(Error::query(&self.query_id, "sub-query list is empty"));
        }
        if self.global.len() != dim {
            return Err(Error::query(
                &self.query_id,
                format!(
                    "global vector has dimension {}, expected {dim}",
                    self.global.len()
                ),
            ));
        }
        for (k, sub) in self.subs.iter().enumerate() {
            if sub.len() != dim {
                return Err(Error::query(
                    &self.query_id,
                    format!("sub-query {k} has dimension {}, expected {dim}", sub.len()),
                ));
            }
        }
        let finite = self
            .global
            .iter()
            .chain(self.subs.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::query(&self.query_id, "non-finite value"));
        }
        Ok(())
    }
}

/// One entry of a ranked result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

/// Top-K images in (score desc, id asc) order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
}

impl RankedResult {
    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.hits.iter().position(|h| h.id == id).map(|p| p + 1)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// Bitwise comparison of ids and scores.
    pub fn bit_eq(&self, other: &RankedResult) -> bool {
        self.hits.len() == other.hits.len()
            && self
                .hits
                .iter()
                .zip(&other.hits)
                .all(|(a, b)| a.id == b.id && a.score.to_bits() == b.score.to_bits())
    }
}
