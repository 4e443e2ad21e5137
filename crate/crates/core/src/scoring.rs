//! Similarity operators and the exhaustive scorers for the three retrieval
//! modes. These evaluate every image and serve as the reference the pruned
//! scheduler is checked against.

use std::cmp::Ordering;

use crate::config::{Aggregation, Mode, SchedulerConfig, SimilarityKind, LOG_SUM_FLOOR};
use crate::error::{Error, Result};
use crate::model::{DecomposedQuery, HierarchicalIndex, Hit, RankedResult};

/// Checked similarity between two vectors.
pub fn sim(a: &[f32], b: &[f32], kind: SimilarityKind) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(similarity(a, b, kind))
}

/// Similarity of equal-length vectors, accumulated in `f64`.
///
/// Cosine is 0 when either vector has zero norm.
#[inline]
pub fn similarity(a: &[f32], b: &[f32], kind: SimilarityKind) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match kind {
        SimilarityKind::Dot => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum(),
        SimilarityKind::Cosine => {
            let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
            for (&x, &y) in a.iter().zip(b) {
                let (x, y) = (f64::from(x), f64::from(y));
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot / (na.sqrt() * nb.sqrt())
            }
        }
        SimilarityKind::NegL1 => -a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
            .sum::<f64>(),
    }
}

/// Combines per-sub-query maxima in ascending sub-query order.
#[inline]
pub fn aggregate(best: &[f64], aggregation: Aggregation) -> f64 {
    match aggregation {
        Aggregation::Product => best.iter().product(),
        Aggregation::LogSum => best.iter().map(|&b| b.max(LOG_SUM_FLOOR).ln()).sum(),
    }
}

/// Total order used for every ranking: score descending, then image position
/// (equivalently image id) ascending.
#[inline]
pub fn rank_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn check_query(query: &DecomposedQuery, index: &HierarchicalIndex) -> Result<()> {
    query.validate(index.dim())
}

fn level_positions(index: &HierarchicalIndex, levels: &[usize]) -> Result<Vec<usize>> {
    if levels.is_empty() {
        return Err(Error::Config("level set is empty".into()));
    }
    levels
        .iter()
        .map(|&n| index.level_position(n).ok_or(Error::MissingLevel(n)))
        .collect()
}

/// `sim(global, whole image)` for every image.
pub fn score_single(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    kind: SimilarityKind,
) -> Result<Vec<f64>> {
    check_query(query, index)?;
    if index.levels().first() != Some(&1) {
        return Err(Error::MissingLevel(1));
    }
    Ok((0..index.len())
        .map(|i| similarity(&query.global, index.whole_image(i), kind))
        .collect())
}

/// Per-image, per-sub-query maxima over every segment of every level in
/// `levels`. Row `i` holds the `N_q` maxima of image `i`.
pub fn best_matches(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    kind: SimilarityKind,
    levels: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_query(query, index)?;
    let positions = level_positions(index, levels)?;
    Ok((0..index.len())
        .map(|i| {
            query
                .subs
                .iter()
                .map(|sub| {
                    positions
                        .iter()
                        .flat_map(|&g| index.segments(i, g))
                        .map(|seg| similarity(sub, seg, kind))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect())
}

/// Global term plus the product of per-sub-query maxima at one level.
pub fn score_flat_mvr(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    kind: SimilarityKind,
    level: usize,
) -> Result<Vec<f64>> {
    let global = score_single(query, index, kind)?;
    let best = best_matches(query, index, kind, &[level])?;
    Ok(global
        .into_iter()
        .zip(best)
        .map(|(g, b)| g + aggregate(&b, Aggregation::Product))
        .collect())
}

/// Aggregated per-sub-query maxima across `levels`, optionally plus the
/// global term.
pub fn score_hierarchical(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    kind: SimilarityKind,
    levels: &[usize],
    aggregation: Aggregation,
    include_global_additive: bool,
) -> Result<Vec<f64>> {
    let best = best_matches(query, index, kind, levels)?;
    let mut scores: Vec<f64> = best.iter().map(|b| aggregate(b, aggregation)).collect();
    if include_global_additive {
        let global = score_single(query, index, kind)?;
        for (s, g) in scores.iter_mut().zip(global) {
            *s += g;
        }
    }
    Ok(scores)
}

/// Scores of every image under the configured mode, ignoring pruning and
/// early exit. `config` must already be resolved against `index`.
pub fn exhaustive_scores(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    config: &SchedulerConfig,
) -> Result<Vec<f64>> {
    let kind = config.similarity;
    match config.mode {
        Mode::Single => score_single(query, index, kind),
        Mode::FlatMvr => score_flat_mvr(query, index, kind, config.levels[0]),
        Mode::Hierarchical => score_hierarchical(
            query,
            index,
            kind,
            &config.levels,
            config.aggregation,
            config.include_global_additive,
        ),
    }
}

/// Top-K of a full score vector under the canonical order.
pub fn top_k(index: &HierarchicalIndex, scores: &[f64], k: usize) -> RankedResult {
    let mut order: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    order.sort_by(|&a, &b| rank_order(a, b));
    order.truncate(k);
    RankedResult {
        hits: order
            .into_iter()
            .map(|(i, score)| Hit {
                id: index.image_id(i).to_string(),
                score,
            })
            .collect(),
    }
}

/// Exhaustive top-K under `config`'s scoring mode.
pub fn oracle_topk(
    query: &DecomposedQuery,
    index: &HierarchicalIndex,
    config: &SchedulerConfig,
) -> Result<RankedResult> {
    let config = config.resolve(index)?;
    let scores = exhaustive_scores(query, index, &config)?;
    Ok(top_k(index, &scores, config.k))
}
