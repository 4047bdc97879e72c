//! On-disk occluder mask packs: `index.csv` plus one PNG per mask.
//!
//! ```text
//! mask_id,mask,area,texture
//! umbrella-01,masks/umbrella-01.png,5123,textures/umbrella-01.png
//! pole-07,masks/pole-07.png,880,
//! ```
//!
//! Mask pixels with luma >= 128 are set. `area` must equal the set-pixel count.

use std::fs;
use std::path::{Path, PathBuf};

use gaitcorrupt_core::occlusion::{BinaryMask, MaskEntry, MaskPack};
use image::{GrayImage, ImageFormat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset_io::{hex, load_frame, save_frame};
use crate::error::{IoError, Result};

pub const INDEX_FILE: &str = "index.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IndexRow {
    mask_id: String,
    mask: String,
    area: usize,
    #[serde(default)]
    texture: Option<String>,
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(|source| IoError::Image { path: path.to_path_buf(), source })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let bits = gray.pixels().map(|p| p.0[0] >= 128).collect();
    BinaryMask::new(h as usize, w as usize, bits).map_err(IoError::core(path))
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let raw = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .ok_or_else(|| IoError::format(path, "mask buffer does not match its shape"))?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| IoError::Image { path: path.to_path_buf(), source })
}

/// Reads a pack directory, checking every recorded area.
pub fn load_pack(dir: &Path) -> Result<MaskPack> {
    let index = dir.join(INDEX_FILE);
    let mut reader = csv::Reader::from_path(&index).map_err(|source| IoError::Csv { path: index.clone(), source })?;
    let mut entries = Vec::new();
    for row in reader.deserialize::<IndexRow>() {
        let row = row.map_err(|source| IoError::Csv { path: index.clone(), source })?;
        let mask_path = dir.join(&row.mask);
        let mask = load_mask(&mask_path)?;
        if mask.count() != row.area {
            return Err(IoError::format(
                &mask_path,
                format!("index says area {} but the mask has {} pixels set", row.area, mask.count()),
            ));
        }
        let texture = match row.texture.as_deref().map(str::trim) {
            Some(t) if !t.is_empty() => Some(load_frame(&dir.join(t))?),
            _ => None,
        };
        entries.push(MaskEntry { mask_id: row.mask_id, mask, area: row.area, texture });
    }
    MaskPack::new(entries).map_err(IoError::core(&index))
}

/// Writes `pack` as `dir/index.csv`, `dir/masks/*.png` and `dir/textures/*.png`.
pub fn write_pack(pack: &MaskPack, dir: &Path) -> Result<()> {
    let masks = dir.join("masks");
    let textures = dir.join("textures");
    fs::create_dir_all(&masks).map_err(IoError::io(&masks))?;
    let index = dir.join(INDEX_FILE);
    let mut w = csv::Writer::from_path(&index).map_err(|source| IoError::Csv { path: index.clone(), source })?;
    for e in pack.entries() {
        let mask = format!("masks/{}.png", e.mask_id);
        save_mask(&e.mask, &dir.join(&mask))?;
        let texture = match &e.texture {
            Some(t) => {
                fs::create_dir_all(&textures).map_err(IoError::io(&textures))?;
                let rel = format!("textures/{}.png", e.mask_id);
                save_frame(t, &dir.join(&rel))?;
                Some(rel)
            }
            None => None,
        };
        w.serialize(IndexRow { mask_id: e.mask_id.clone(), mask, area: e.area, texture })
            .map_err(|source| IoError::Csv { path: index.clone(), source })?;
    }
    w.flush().map_err(IoError::io(&index))
}

/// Content hash of a loaded pack (ids, masks and textures), independent of file encoding.
pub fn pack_digest(pack: &MaskPack) -> String {
    let mut h = Sha256::new();
    h.update(b"gaitcorrupt-maskpack-v1");
    for e in pack.entries() {
        h.update((e.mask_id.len() as u64).to_le_bytes());
        h.update(e.mask_id.as_bytes());
        h.update((e.mask.height() as u64).to_le_bytes());
        h.update((e.mask.width() as u64).to_le_bytes());
        h.update(e.mask.bits().iter().map(|&b| u8::from(b)).collect::<Vec<_>>());
        match &e.texture {
            Some(t) => {
                h.update([1]);
                h.update(t.pixels());
            }
            None => h.update([0]),
        }
    }
    hex(&h.finalize())
}

#[derive(Debug, Deserialize)]
struct CocoFile {
    #[serde(default)]
    categories: Vec<CocoCategory>,
    annotations: Vec<CocoAnnotation>,
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u64,
    name: String,
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    id: u64,
    #[serde(default)]
    category_id: u64,
    segmentation: serde_json::Value,
}

/// Result of converting COCO annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CocoImport {
    pub written: usize,
    /// RLE, empty or degenerate annotations that were not converted.
    pub skipped: usize,
}

/// Even-odd fill of polygon rings sampled at pixel centres, in a frame
/// spanning their bounding box.
pub fn rasterize_polygons(rings: &[Vec<(f64, f64)>]) -> Option<BinaryMask> {
    let pts = rings.iter().flatten();
    let min_x = pts.clone().map(|p| p.0).fold(f64::INFINITY, f64::min).floor();
    let min_y = pts.clone().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
    let max_x = pts.clone().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil();
    let max_y = pts.map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil();
    if !(max_x > min_x && max_y > min_y) {
        return None;
    }
    let (w, h) = ((max_x - min_x) as usize, (max_y - min_y) as usize);
    let mask = BinaryMask::from_fn(h, w, |y, x| {
        let (px, py) = (min_x + x as f64 + 0.5, min_y + y as f64 + 0.5);
        let mut inside = false;
        for ring in rings {
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                if (a.1 > py) != (b.1 > py) && px < a.0 + (py - a.1) * (b.0 - a.0) / (b.1 - a.1) {
                    inside = !inside;
                }
            }
        }
        inside
    });
    (mask.count() > 0).then_some(mask)
}

/// Converts polygon annotations from a COCO file into a mask pack, skipping
/// masks smaller than `min_area`.
pub fn pack_from_coco(annotations: &Path, out: &Path, min_area: usize) -> Result<CocoImport> {
    let bytes = fs::read(annotations).map_err(IoError::io(annotations))?;
    let coco: CocoFile =
        serde_json::from_slice(&bytes).map_err(|source| IoError::Json { path: annotations.to_path_buf(), source })?;
    let name_of = |id: u64| {
        coco.categories.iter().find(|c| c.id == id).map_or_else(|| format!("cat{id}"), |c| c.name.replace(' ', "_"))
    };
    let mut entries = Vec::new();
    let mut skipped = 0;
    for ann in &coco.annotations {
        let Some(polys) = ann.segmentation.as_array() else {
            skipped += 1;
            continue;
        };
        let rings: Vec<Vec<(f64, f64)>> = polys
            .iter()
            .filter_map(|p| p.as_array())
            .map(|coords| {
                let v: Vec<f64> = coords.iter().filter_map(|c| c.as_f64()).collect();
                v.chunks_exact(2).map(|c| (c[0], c[1])).collect::<Vec<_>>()
            })
            .filter(|r| r.len() >= 3)
            .collect();
        match rasterize_polygons(&rings) {
            Some(mask) if mask.count() >= min_area.max(1) => {
                entries.push(MaskEntry::new(format!("{}-{}", name_of(ann.category_id), ann.id), mask, None))
            }
            _ => skipped += 1,
        }
    }
    let written = entries.len();
    let pack = MaskPack::new(entries).map_err(IoError::core(annotations))?;
    write_pack(&pack, out)?;
    Ok(CocoImport { written, skipped })
}

/// Relative-path-free location of a pack, for manifests.
pub fn display_path(p: &Path) -> String {
    fs::canonicalize(p).unwrap_or_else(|_| PathBuf::from(p)).to_string_lossy().into_owned()
}
