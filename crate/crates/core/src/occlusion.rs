//! Static occluders pasted from an area-sorted mask pack.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::{round_half_away, Frame, FrameSequence, CHANNELS};
use crate::rng::SeededRng;
use crate::severity::Severity;

/// Occluder bounding-box area as a fraction of the frame, per severity quintile.
pub const TARGET_AREA_FRACTION: [f64; 5] = [0.05, 0.10, 0.18, 0.28, 0.40];
/// Fill used when an entry has no texture.
pub const FLAT_FILL: [u8; 3] = [128, 128, 128];
/// Placement draws before falling back to a centered occluder.
const PLACEMENT_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::InvalidMask(format!(
                "{} bits for a {height}x{width} mask",
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, bits }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Inclusive `(top, left, bottom, right)` of the set pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (y, x) = (i / self.width, i % self.width);
            bb = Some(match bb {
                None => (y, x, y, x),
                Some((t, l, b, r)) => (t.min(y), l.min(x), b.max(y), r.max(x)),
            });
        }
        bb
    }

    fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Self {
        Self::from_fn(h, w, |y, x| self.get(top + y, left + x))
    }

    fn resize_nearest(&self, h: usize, w: usize) -> Self {
        Self::from_fn(h, w, |y, x| {
            self.get(nearest(y, h, self.height), nearest(x, w, self.width))
        })
    }
}

#[inline]
fn nearest(i: usize, dst: usize, src: usize) -> usize {
    let s = libm::floor((i as f64 + 0.5) * src as f64 / dst as f64) as usize;
    s.min(src - 1)
}

fn crop_frame(f: &Frame, top: usize, left: usize, h: usize, w: usize) -> Frame {
    Frame::from_fn(h, w, |y, x| f.pixel(top + y, left + x))
}

fn resize_frame_nearest(f: &Frame, h: usize, w: usize) -> Frame {
    Frame::from_fn(h, w, |y, x| f.pixel(nearest(y, h, f.height()), nearest(x, w, f.width())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskEntry {
    pub mask_id: String,
    pub mask: BinaryMask,
    pub area: usize,
    pub texture: Option<Frame>,
}

impl MaskEntry {
    /// Entry whose area is computed from the mask.
    pub fn new(mask_id: impl Into<String>, mask: BinaryMask, texture: Option<Frame>) -> Self {
        let area = mask.count();
        Self { mask_id: mask_id.into(), mask, area, texture }
    }
}

/// Occluder masks ordered by ascending area (ties by id).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPack {
    entries: Vec<MaskEntry>,
}

impl MaskPack {
    /// Validates and sorts the entries. Fewer than five entries is accepted
    /// here but rejected by [`severity_group`].
    pub fn new(mut entries: Vec<MaskEntry>) -> Result<Self> {
        for e in &entries {
            let count = e.mask.count();
            if count == 0 {
                return Err(Error::InvalidMask(format!("mask `{}` is empty", e.mask_id)));
            }
            if count != e.area {
                return Err(Error::InvalidMask(format!(
                    "mask `{}` declares area {} but has {count} pixels",
                    e.mask_id, e.area
                )));
            }
            if let Some(t) = &e.texture {
                if t.height() != e.mask.height() || t.width() != e.mask.width() {
                    return Err(Error::InvalidMask(format!(
                        "texture of `{}` is {}x{}, mask is {}x{}",
                        e.mask_id,
                        t.height(),
                        t.width(),
                        e.mask.height(),
                        e.mask.width()
                    )));
                }
            }
        }
        entries.sort_by(|a, b| a.area.cmp(&b.area).then_with(|| a.mask_id.cmp(&b.mask_id)));
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[MaskEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A deterministic pack of `n` shapes (ellipses, rectangles, triangles) of
    /// strictly increasing area; every other entry carries a solid texture.
    pub fn synthetic(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| {
                let h = 8 + 4 * i;
                let w = 6 + 5 * i;
                let mask = match i % 3 {
                    0 => BinaryMask::from_fn(h, w, |y, x| {
                        let dy = (y as f64 + 0.5) / h as f64 * 2.0 - 1.0;
                        let dx = (x as f64 + 0.5) / w as f64 * 2.0 - 1.0;
                        dy * dy + dx * dx <= 1.0
                    }),
                    1 => BinaryMask::from_fn(h, w, |_, _| true),
                    _ => BinaryMask::from_fn(h, w, |y, x| x * h <= (y + 1) * w),
                };
                let texture = (i % 2 == 1).then(|| {
                    let c = [(40 + 30 * i % 200) as u8, (200 - 17 * i % 180) as u8, (90 + 11 * i % 150) as u8];
                    Frame::from_fn(h, w, |_, _| c)
                });
                MaskEntry::new(format!("synthetic-{i:03}"), mask, texture)
            })
            .collect();
        Self::new(entries).expect("synthetic masks are valid")
    }
}

/// Entries in the `severity`-th area quintile: `[floor((q-1)n/5), floor(qn/5))`.
pub fn severity_group(pack: &MaskPack, severity: Severity) -> Result<&[MaskEntry]> {
    let n = pack.len();
    if n < 5 {
        return Err(Error::PackTooSmall(n));
    }
    let q = severity.index();
    Ok(&pack.entries[q * n / 5..(q + 1) * n / 5])
}

/// Where and how an occluder landed.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Placement {
    pub mask_id: String,
    /// Index of the chosen entry within its severity group.
    pub group_index: usize,
    pub top: isize,
    pub left: isize,
    pub height: usize,
    pub width: usize,
}

fn inside_count(mask: &BinaryMask, top: isize, left: isize, fh: usize, fw: usize) -> usize {
    let mut n = 0;
    for y in 0..mask.height() {
        let fy = top + y as isize;
        if fy < 0 || fy >= fh as isize {
            continue;
        }
        for x in 0..mask.width() {
            let fx = left + x as isize;
            if fx >= 0 && fx < fw as isize && mask.get(y, x) {
                n += 1;
            }
        }
    }
    n
}

/// Composites one occluder, identical on every frame.
///
/// Returns the corrupted sequence, the frame-sized mask of replaced pixels and
/// the placement record.
pub fn occlude_with_placement(
    seq: &FrameSequence,
    pack: &MaskPack,
    severity: Severity,
    rng: &SeededRng,
) -> Result<(FrameSequence, BinaryMask, Placement)> {
    let group = severity_group(pack, severity)?;
    let mut draws = rng.sequence_stream();
    let group_index = draws.below(group.len() as u64) as usize;
    let entry = &group[group_index];
    let (fh, fw) = (seq.height(), seq.width());

    let (t, l, b, r) = entry.mask.bounding_box().expect("pack masks are nonempty");
    let (bh, bw) = (b - t + 1, r - l + 1);
    let target = TARGET_AREA_FRACTION[severity.index()] * (fh * fw) as f64;
    let scale = libm::sqrt(target / (bh * bw) as f64);
    let nh = (round_half_away(bh as f64 * scale) as usize).max(1);
    let nw = (round_half_away(bw as f64 * scale) as usize).max(1);
    let mut mask = entry.mask.crop(t, l, bh, bw).resize_nearest(nh, nw);
    if mask.count() == 0 {
        mask.set(nh / 2, nw / 2, true);
    }
    let texture = entry.texture.as_ref().map(|tex| resize_frame_nearest(&crop_frame(tex, t, l, bh, bw), nh, nw));

    let total = mask.count();
    let span = |frame: usize, size: usize| (frame + size - 1) as u64;
    let mut origin = None;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let top = draws.below(span(fh, nh)) as isize - (nh as isize - 1);
        let left = draws.below(span(fw, nw)) as isize - (nw as isize - 1);
        if 2 * inside_count(&mask, top, left, fh, fw) >= total {
            origin = Some((top, left));
            break;
        }
    }
    let (top, left) =
        origin.unwrap_or(((fh as isize - nh as isize) / 2, (fw as isize - nw as isize) / 2));

    let mut placed = BinaryMask::empty(fh, fw);
    let mut paint: Vec<(usize, [u8; 3])> = Vec::new();
    for y in 0..nh {
        for x in 0..nw {
            let (fy, fx) = (top + y as isize, left + x as isize);
            if !mask.get(y, x) || fy < 0 || fx < 0 || fy >= fh as isize || fx >= fw as isize {
                continue;
            }
            let (fy, fx) = (fy as usize, fx as usize);
            placed.set(fy, fx, true);
            let colour = texture.as_ref().map_or(FLAT_FILL, |tex| tex.pixel(y, x));
            paint.push(((fy * fw + fx) * CHANNELS, colour));
        }
    }
    let out = seq.map_frames(|_, f| {
        let mut g = f.clone();
        for &(i, c) in &paint {
            g.pixels_mut()[i..i + CHANNELS].copy_from_slice(&c);
        }
        g
    });
    let placement = Placement {
        mask_id: entry.mask_id.clone(),
        group_index,
        top,
        left,
        height: nh,
        width: nw,
    };
    Ok((out, placed, placement))
}

pub fn occlude(
    seq: &FrameSequence,
    pack: &MaskPack,
    severity: Severity,
    rng: &SeededRng,
) -> Result<(FrameSequence, BinaryMask)> {
    occlude_with_placement(seq, pack, severity, rng).map(|(s, m, _)| (s, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sev(l: u8) -> Severity {
        Severity::new(l).unwrap()
    }

    fn ids(group: &[MaskEntry]) -> Vec<&str> {
        group.iter().map(|e| e.mask_id.as_str()).collect()
    }

    #[test]
    fn quintiles_of_ten() {
        let pack = MaskPack::synthetic(10);
        let mut by_area: Vec<(usize, &str)> = pack.entries().iter().map(|e| (e.area, e.mask_id.as_str())).collect();
        by_area.sort();
        let names: Vec<&str> = by_area.iter().map(|p| p.1).collect();
        assert_eq!(ids(severity_group(&pack, sev(1)).unwrap()), names[..2]);
        assert_eq!(ids(severity_group(&pack, sev(5)).unwrap()), names[8..]);
    }

    #[test]
    fn quintiles_cover_pack() {
        for n in 5..23 {
            let pack = MaskPack::synthetic(n);
            let total: usize = Severity::ALL.iter().map(|&s| severity_group(&pack, s).unwrap().len()).sum();
            assert_eq!(total, n);
            assert!(Severity::ALL.iter().all(|&s| !severity_group(&pack, s).unwrap().is_empty()));
        }
    }

    #[test]
    fn small_pack_rejected() {
        let pack = MaskPack::synthetic(4);
        assert_eq!(severity_group(&pack, sev(1)), Err(Error::PackTooSmall(4)));
        let seq = FrameSequence::new(vec![Frame::filled(8, 8, 0)], "s").unwrap();
        assert_eq!(occlude(&seq, &pack, sev(1), &SeededRng::new(0)).unwrap_err(), Error::PackTooSmall(4));
    }

    #[test]
    fn equal_areas_sorted_by_id() {
        let sq = |id: &str| MaskEntry::new(id, BinaryMask::from_fn(3, 3, |_, _| true), None);
        let pack = MaskPack::new(vec![sq("e"), sq("b"), sq("d"), sq("a"), sq("c")]).unwrap();
        assert_eq!(ids(pack.entries()), ["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn declared_area_checked() {
        let mut e = MaskEntry::new("x", BinaryMask::from_fn(2, 2, |_, _| true), None);
        e.area = 3;
        assert!(matches!(MaskPack::new(vec![e]), Err(Error::InvalidMask(_))));
    }

    #[test]
    fn occlusion_is_static_and_local() {
        let frames: Vec<Frame> = (0..5)
            .map(|t| Frame::from_fn(48, 64, |y, x| [(x * 3 + t) as u8, (y * 5) as u8, 17]))
            .collect();
        let seq = FrameSequence::new(frames, "o").unwrap();
        let pack = MaskPack::synthetic(10);
        for s in Severity::ALL {
            let (out, mask) = occlude(&seq, &pack, s, &SeededRng::new(12)).unwrap();
            assert!(mask.count() > 0);
            let first: Vec<[u8; 3]> = (0..48 * 64)
                .filter(|&i| mask.bits()[i])
                .map(|i| out.frames()[0].pixel(i / 64, i % 64))
                .collect();
            for (f_in, f_out) in seq.frames().iter().zip(out.frames()) {
                for y in 0..48 {
                    for x in 0..64 {
                        if !mask.get(y, x) {
                            assert_eq!(f_in.pixel(y, x), f_out.pixel(y, x));
                        }
                    }
                }
                let here: Vec<[u8; 3]> = (0..48 * 64)
                    .filter(|&i| mask.bits()[i])
                    .map(|i| f_out.pixel(i / 64, i % 64))
                    .collect();
                assert_eq!(here, first);
            }
        }
    }

    #[test]
    fn occluder_draw_is_reproducible() {
        let seq = FrameSequence::new(vec![Frame::filled(32, 32, 5); 5], "r").unwrap();
        let pack = MaskPack::synthetic(10);
        let a = occlude_with_placement(&seq, &pack, sev(2), &SeededRng::new(77)).unwrap();
        let b = occlude_with_placement(&seq, &pack, sev(2), &SeededRng::new(77)).unwrap();
        assert_eq!(a.2, b.2);
        assert_eq!(a.1, b.1);
        assert!(a.2.group_index < 2);
    }

    #[test]
    fn at_least_half_inside() {
        let seq = FrameSequence::new(vec![Frame::filled(40, 40, 0)], "h").unwrap();
        let pack = MaskPack::synthetic(10);
        for seed in 0..40 {
            for s in Severity::ALL {
                let (_, mask, p) = occlude_with_placement(&seq, &pack, s, &SeededRng::new(seed)).unwrap();
                let (t, l, b, r) = {
                    let e = pack.entries().iter().find(|e| e.mask_id == p.mask_id).unwrap();
                    e.mask.bounding_box().unwrap()
                };
                let e = pack.entries().iter().find(|e| e.mask_id == p.mask_id).unwrap();
                let full = e.mask.crop(t, l, b - t + 1, r - l + 1).resize_nearest(p.height, p.width).count();
                assert!(2 * mask.count() >= full.min(40 * 40), "seed {seed} sev {s}");
            }
        }
    }

    #[test]
    fn occluded_area_grows_with_severity() {
        let seq = FrameSequence::new(vec![Frame::filled(64, 64, 0)], "g").unwrap();
        let pack = MaskPack::synthetic(10);
        let mut prev = 0.0;
        for s in Severity::ALL {
            let mean = (0..60)
                .map(|seed| occlude(&seq, &pack, s, &SeededRng::new(seed)).unwrap().1.count() as f64)
                .sum::<f64>()
                / 60.0;
            assert!(mean >= prev, "severity {s}: {mean} < {prev}");
            prev = mean;
        }
    }
}
