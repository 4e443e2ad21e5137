//! Planted synthetic datasets.
//!
//! Every query gets a ground-truth image. For each sub-query, one segment of
//! that image at the sub-query's planted scale is set to the sub-query plus
//! Gaussian noise, then normalized. Other segments are random unit vectors,
//! shaped by two structure knobs:
//!
//! - `leak` mixes each planted sub-query into one random unplanted segment of
//!   the ground-truth image at every other level, with that weight. This
//!   models an object that is still visible, though misaligned, at
//!   granularities other than its own. All sub-queries leak into the single
//!   whole-image segment.
//! - `coherence` builds every unplanted segment of an image from a small set
//!   of per-image content vectors, so an image looks alike across levels.
//!
//! Setting both to 0 gives purely random unplanted vectors.
//!
//! The global query vector is the normalized sum of the sub-queries plus
//! noise. `global_mix` blends in a random direction with that weight, for
//! global embeddings that only loosely match the image.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecomposedQuery, HierarchicalIndex, ImageRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub images: usize,
    pub dim: usize,
    /// Segment counts; must start with 1.
    pub levels: Vec<usize>,
    pub queries: usize,
    pub subs_per_query: usize,
    /// Segment counts at which sub-queries are planted, assigned round-robin.
    pub planted_scales: Vec<usize>,
    /// Per-component standard deviation of the plant noise.
    pub noise: f64,
    pub seed: u64,
    pub leak: f64,
    pub coherence: f64,
    pub contents_per_image: usize,
    pub global_mix: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            images: 500,
            dim: 64,
            levels: vec![1, 4, 9, 16],
            queries: 200,
            subs_per_query: 3,
            planted_scales: vec![4, 16],
            noise: 0.05,
            seed: 0,
            leak: 0.4,
            coherence: 0.995,
            contents_per_image: 1,
            global_mix: 0.75,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.levels.first() != Some(&1) || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "levels must start at 1 and strictly increase, got {:?}",
                self.levels
            ));
        }
        if self.subs_per_query == 0 {
            return bad("subs_per_query must be at least 1".into());
        }
        if self.planted_scales.is_empty() {
            return bad("planted_scales is empty".into());
        }
        if let Some(s) = self
            .planted_scales
            .iter()
            .find(|s| !self.levels.contains(s))
        {
            return bad(format!("planted scale {s} is not one of the levels"));
        }
        if self.queries > 0 && self.images == 0 {
            return bad("queries need at least one image".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        for (name, v) in [
            ("leak", self.leak),
            ("coherence", self.coherence),
            ("global_mix", self.global_mix),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.coherence > 0.0 && self.contents_per_image == 0 {
            return bad("contents_per_image must be at least 1 when coherence > 0".into());
        }
        Ok(())
    }
}

/// An index with its planted queries.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub index: HierarchicalIndex,
    pub queries: Vec<DecomposedQuery>,
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalized(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        return e;
    }
    v.iter().map(|x| (x / n) as f32).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let g = gaussian(rng, d);
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    g.into_iter().map(|x| x / n).collect()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_rows: usize = spec.levels.iter().sum();
    let level_start: Vec<usize> = spec
        .levels
        .iter()
        .scan(0, |acc, &n| {
            let s = *acc;
            *acc += n;
            Some(s)
        })
        .collect();

    // segments[i][row] in f64, normalized at the end
    let mut segments: Vec<Vec<Vec<f64>>> = Vec::with_capacity(spec.images);
    for _ in 0..spec.images {
        let contents: Vec<Vec<f64>> = if spec.coherence > 0.0 {
            (0..spec.contents_per_image)
                .map(|_| random_unit(&mut rng, d))
                .collect()
        } else {
            Vec::new()
        };
        let rows = (0..total_rows)
            .map(|_| {
                let r = random_unit(&mut rng, d);
                if contents.is_empty() {
                    r
                } else {
                    let c = &contents[rng.random_range(0..contents.len())];
                    c.iter()
                        .zip(&r)
                        .map(|(c, r)| spec.coherence * c + (1.0 - spec.coherence) * r)
                        .collect()
                }
            })
            .collect();
        segments.push(rows);
    }

    let mut order: Vec<usize> = (0..spec.images).collect();
    order.shuffle(&mut rng);

    let level_of = |n_g: usize| spec.levels.iter().position(|&l| l == n_g).unwrap();
    let mut planted: HashSet<(usize, usize)> = HashSet::new();
    let mut queries = Vec::with_capacity(spec.queries);
    let mut leaks: Vec<(usize, usize, Vec<f64>)> = Vec::new();

    for q in 0..spec.queries {
        let gt = order[q % spec.images];
        let subs: Vec<Vec<f64>> = (0..spec.subs_per_query)
            .map(|_| random_unit(&mut rng, d))
            .collect();
        for (k, sub) in subs.iter().enumerate() {
            let scale = spec.planted_scales[(q + k) % spec.planted_scales.len()];
            let g = level_of(scale);
            plant(
                &mut rng,
                &mut planted,
                &mut segments,
                gt,
                level_start[g],
                scale,
                sub,
                spec.noise,
            )?;
            if spec.leak > 0.0 {
                for (h, &n_h) in spec.levels.iter().enumerate() {
                    if h != g {
                        let j = rng.random_range(0..n_h);
                        leaks.push((gt, level_start[h] + j, sub.clone()));
                    }
                }
            }
        }
        let mut global = vec![0.0f64; d];
        for sub in &subs {
            for (g, s) in global.iter_mut().zip(sub) {
                *g += s;
            }
        }
        for (g, z) in global.iter_mut().zip(gaussian(&mut rng, d)) {
            *g += spec.noise * z;
        }
        if spec.global_mix > 0.0 {
            let n = global.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = random_unit(&mut rng, d);
            for (g, r) in global.iter_mut().zip(r) {
                *g = (1.0 - spec.global_mix) * (*g / n) + spec.global_mix * r;
            }
        }
        queries.push(DecomposedQuery {
            query_id: format!("q{q:05}"),
            global: normalized(&global),
            subs: subs.iter().map(|s| normalized(s)).collect(),
            ground_truth: Some(image_id(gt)),
        });
    }

    let mut leaked: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for (img, row, sub) in leaks {
        if planted.contains(&(img, row)) {
            continue;
        }
        let acc = leaked.entry((img, row)).or_insert_with(|| vec![0.0; d]);
        for (a, s) in acc.iter_mut().zip(&sub) {
            *a += s;
        }
    }
    let mut leaked: Vec<_> = leaked.into_iter().collect();
    leaked.sort_unstable_by_key(|(key, _)| *key);
    for ((img, row), sum) in leaked {
        let seg = &mut segments[img][row];
        let n = seg.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (v, s) in seg.iter_mut().zip(&sum) {
            *v = (1.0 - spec.leak) * (*v / n) + spec.leak * s;
        }
    }

    let records = segments
        .into_iter()
        .enumerate()
        .map(|(i, rows)| {
            let mut levels = Vec::with_capacity(spec.levels.len());
            for (g, &n_g) in spec.levels.iter().enumerate() {
                let block: Vec<f32> = rows[level_start[g]..level_start[g] + n_g]
                    .iter()
                    .flat_map(|r| normalized(r))
                    .collect();
                levels.push(block);
            }
            ImageRecord {
                id: image_id(i),
                levels,
            }
        })
        .collect();
    let index = HierarchicalIndex::new(d, true, spec.levels.clone(), records)?;
    Ok(SynthDataset { index, queries })
}

/// Overwrites a random free segment of `image` at the level starting at row
/// `start` with a noisy copy of `sub`.
#[allow(clippy::too_many_arguments)]
fn plant(
    rng: &mut ChaCha8Rng,
    planted: &mut HashSet<(usize, usize)>,
    segments: &mut [Vec<Vec<f64>>],
    image: usize,
    start: usize,
    scale: usize,
    sub: &[f64],
    noise: f64,
) -> Result<usize> {
    let free: Vec<usize> = (start..start + scale)
        .filter(|row| !planted.contains(&(image, *row)))
        .collect();
    if free.is_empty() {
        return Err(Error::Config(format!(
            "image {image} has no free segment left at level {scale}; use fewer queries or sub-queries"
        )));
    }
    let row = free[rng.random_range(0..free.len())];
    planted.insert((image, row));
    segments[image][row] = sub
        .iter()
        .zip(gaussian(rng, sub.len()))
        .map(|(s, z)| s + noise * z)
        .collect();
    Ok(row)
}

fn image_id(i: usize) -> String {
    format!("img{i:06}")
}
