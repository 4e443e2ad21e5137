//! HMIR container: a directory holding `manifest.json` and `vectors.bin`.
//!
//! `vectors.bin` is a sequence of little-endian `f32` values. For every image
//! and every level, the manifest names the byte offset where that level's
//! `N_g * dim` values start. A block's extent runs to the next offset in the
//! file (or to the end of the file); a block whose extent is not exactly
//! `N_g` rows is rejected with the image id and level.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HierarchicalIndex, ImageRecord};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VECTORS_FILE: &str = "vectors.bin";

const FORMAT: &str = "HMIR";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    dim: usize,
    normalized: bool,
    levels: Vec<usize>,
    images: Vec<ManifestImage>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestImage {
    id: String,
    offsets: Vec<u64>,
}

pub fn load_index(path: impl AsRef<Path>) -> Result<HierarchicalIndex> {
    let dir = path.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let raw = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_slice(&raw).map_err(|e| Error::Manifest(e.to_string()))?;
    if manifest.format != FORMAT {
        return Err(Error::Manifest(format!(
            "format is {:?}, expected {FORMAT:?}",
            manifest.format
        )));
    }
    if manifest.version != VERSION {
        return Err(Error::Manifest(format!(
            "unsupported version {}",
            manifest.version
        )));
    }
    if manifest.dim == 0 {
        return Err(Error::Manifest("dimension must be at least 1".into()));
    }

    let vectors_path = dir.join(VECTORS_FILE);
    let bytes = fs::read(&vectors_path).map_err(|e| Error::io(&vectors_path, e))?;
    let file_len = bytes.len() as u64;

    // every block ends where the next one (in byte order) begins
    let mut starts: Vec<u64> = Vec::new();
    for img in &manifest.images {
        if img.offsets.len() != manifest.levels.len() {
            return Err(Error::Manifest(format!(
                "image {:?} lists {} offsets for {} levels",
                img.id,
                img.offsets.len(),
                manifest.levels.len()
            )));
        }
        for &off in &img.offsets {
            if off > file_len {
                return Err(Error::Manifest(format!(
                    "image {:?} offset {off} is past the end of {VECTORS_FILE} ({file_len} bytes)",
                    img.id
                )));
            }
            if off % 4 != 0 {
                return Err(Error::Manifest(format!(
                    "image {:?} offset {off} is not 4-byte aligned",
                    img.id
                )));
            }
            starts.push(off);
        }
    }
    starts.sort_unstable();
    starts.dedup();
    let block_end = |off: u64| -> u64 {
        match starts.binary_search(&off) {
            Ok(p) if p + 1 < starts.len() => starts[p + 1],
            _ => file_len,
        }
    };

    let row_bytes = 4 * manifest.dim as u64;
    let mut records = Vec::with_capacity(manifest.images.len());
    for img in manifest.images {
        let mut levels = Vec::with_capacity(manifest.levels.len());
        for (&off, &n_g) in img.offsets.iter().zip(&manifest.levels) {
            let extent = block_end(off) - off;
            let expected = n_g as u64 * row_bytes;
            if extent != expected {
                if extent % row_bytes != 0 {
                    return Err(Error::image(
                        &img.id,
                        n_g,
                        format!(
                            "block of {extent} bytes is not a whole number of {}-dimensional rows",
                            manifest.dim
                        ),
                    ));
                }
                return Err(Error::image(
                    &img.id,
                    n_g,
                    format!("expected {n_g} segments, found {}", extent / row_bytes),
                ));
            }
            let start = off as usize;
            let block: Vec<f32> = bytes[start..start + expected as usize]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            levels.push(block);
        }
        records.push(ImageRecord { id: img.id, levels });
    }

    HierarchicalIndex::new(manifest.dim, manifest.normalized, manifest.levels, records)
}

/// Writes the canonical container: images in ascending id order, levels in
/// ascending order, blocks packed back to back.
pub fn save_index(index: &HierarchicalIndex, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut payload = Vec::with_capacity(index.len() * index.rows_per_image() * index.dim() * 4);
    let mut images = Vec::with_capacity(index.len());
    for i in 0..index.len() {
        let mut offsets = Vec::with_capacity(index.levels().len());
        for g in 0..index.levels().len() {
            offsets.push(payload.len() as u64);
            for v in index.level_block(i, g) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        images.push(ManifestImage {
            id: index.image_id(i).to_string(),
            offsets,
        });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        dim: index.dim(),
        normalized: index.normalized(),
        levels: index.levels().to_vec(),
        images,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');

    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    let vectors_path = dir.join(VECTORS_FILE);
    fs::write(&vectors_path, payload).map_err(|e| Error::io(&vectors_path, e))?;
    Ok(())
}
