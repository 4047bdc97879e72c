//! PNG frame directories, the `identity/condition/view` dataset layout and
//! corruption manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use gaitcorrupt_core::occlusion::{MaskPack, Placement};
use gaitcorrupt_core::{apply, CorruptionKind, CorruptionSpec, Frame, FrameSequence, Severity, SeverityParams};
use image::{ColorType, ImageFormat};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IoError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// File name of output frame `i`.
pub fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.png")
}

fn is_png(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// PNG files directly inside `dir`, in lexicographic file-name order.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(IoError::io(dir))? {
        let path = entry.map_err(IoError::io(dir))?.path();
        if path.is_file() && is_png(&path) {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|source| IoError::Image { path: path.to_path_buf(), source })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Frame::new(h as usize, w as usize, rgb.into_raw()).map_err(IoError::core(path))
}

/// Loads every PNG in `dir` as one sequence; grayscale frames become RGB.
pub fn load_sequence(dir: &Path) -> Result<FrameSequence> {
    let paths = frame_paths(dir)?;
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let f = load_frame(p)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if !first.same_shape(&f) {
                return Err(IoError::Core {
                    path: p.clone(),
                    source: gaitcorrupt_core::Error::DimMismatch {
                        expected: format!("{}x{}", first.height(), first.width()),
                        found: format!("{}x{}", f.height(), f.width()),
                    },
                });
            }
        }
        frames.push(f);
    }
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    FrameSequence::new(frames, id).map_err(IoError::core(dir))
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    image::save_buffer_with_format(
        path,
        frame.pixels(),
        frame.width() as u32,
        frame.height() as u32,
        ColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|source| IoError::Image { path: path.to_path_buf(), source })
}

/// Hex SHA-256 over the sequence shape and pixel bytes.
pub fn sequence_digest(seq: &FrameSequence) -> String {
    let mut h = Sha256::new();
    h.update(b"gaitcorrupt-frames-v1");
    for v in [seq.len(), seq.height(), seq.width()] {
        h.update((v as u64).to_le_bytes());
    }
    for f in seq.frames() {
        h.update(f.pixels());
    }
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(IoError::io(path))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes frames plus `manifest.json` to a sibling temp directory, then
/// renames it onto `dir`, replacing any previous output.
pub fn save_sequence<M: Serialize>(seq: &FrameSequence, dir: &Path, manifest: &M) -> Result<()> {
    save_sequence_with(seq, dir, manifest, |_| Ok(()))
}

/// [`save_sequence`] with a callback after each written frame; an error from
/// the callback aborts the save and nothing appears at `dir`.
pub fn save_sequence_with<M: Serialize>(
    seq: &FrameSequence,
    dir: &Path,
    manifest: &M,
    mut after_frame: impl FnMut(usize) -> io::Result<()>,
) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(IoError::io(parent))?;
    let name = dir.file_name().ok_or_else(|| IoError::format(dir, "output path has no final component"))?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}-{}",
        name.to_string_lossy(),
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let mut write = || -> Result<()> {
        fs::create_dir(&tmp).map_err(IoError::io(&tmp))?;
        for (i, f) in seq.frames().iter().enumerate() {
            save_frame(f, &tmp.join(frame_name(i)))?;
            after_frame(i).map_err(IoError::io(&tmp))?;
        }
        let json = serde_json::to_vec_pretty(manifest)
            .map_err(|source| IoError::Json { path: tmp.join(MANIFEST_FILE), source })?;
        fs::write(tmp.join(MANIFEST_FILE), json).map_err(IoError::io(&tmp))?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(IoError::io(dir))?;
        }
        fs::rename(&tmp, dir).map_err(IoError::io(dir))
    };
    let out = write();
    if out.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    out
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(IoError::io(path))?;
    serde_json::from_slice(&bytes).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(IoError::io(path))
}

/// Writes one compact JSON record per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for r in records {
        serde_json::to_writer(&mut bytes, r).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
        bytes.push(b'\n');
    }
    fs::write(path, bytes).map_err(IoError::io(path))
}

/// Reads line-delimited JSON; blank lines are skipped.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(IoError::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IoError::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Where one sequence lives in a dataset tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SequenceLocation {
    pub identity: String,
    pub condition: String,
    pub view: String,
}

impl SequenceLocation {
    /// `identity/condition/view`
    pub fn sequence_id(&self) -> String {
        format!("{}/{}/{}", self.identity, self.condition, self.view)
    }

    pub fn under(&self, root: &Path) -> PathBuf {
        root.join(&self.identity).join(&self.condition).join(&self.view)
    }
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(IoError::io(dir))? {
        let path = entry.map_err(IoError::io(dir))?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if path.is_dir() && !hidden {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn last(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Every `root/identity/condition/view` directory holding at least one PNG, sorted.
pub fn discover_sequences(root: &Path) -> Result<Vec<SequenceLocation>> {
    let mut out = Vec::new();
    for id in subdirs(root)? {
        for cond in subdirs(&id)? {
            for view in subdirs(&cond)? {
                if !frame_paths(&view)?.is_empty() {
                    out.push(SequenceLocation { identity: last(&id), condition: last(&cond), view: last(&view) });
                }
            }
        }
    }
    Ok(out)
}

/// `<base>/<root name>-<kind>-s<severity>`
pub fn corrupted_root(base: &Path, root_name: &str, kind: CorruptionKind, severity: Severity) -> PathBuf {
    base.join(format!("{root_name}-{kind}-s{severity}"))
}

/// Provenance of a loaded or emitted clean sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub sequence_id: String,
    pub identity: String,
    pub condition: String,
    pub view: String,
    pub frames: Vec<String>,
    pub digest: String,
}

impl SequenceManifest {
    pub fn describe(loc: &SequenceLocation, dir: &Path, seq: &FrameSequence) -> Result<Self> {
        Ok(Self {
            sequence_id: loc.sequence_id(),
            identity: loc.identity.clone(),
            condition: loc.condition.clone(),
            view: loc.view.clone(),
            frames: frame_paths(dir)?.iter().map(|p| last(p)).collect(),
            digest: sequence_digest(seq),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPackRef {
    pub path: String,
    pub digest: String,
}

/// Everything needed to regenerate one corrupted sequence bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionManifest {
    pub source_sequence_id: String,
    pub source_path: String,
    pub source_digest: String,
    pub spec: CorruptionSpec,
    pub engine_version: String,
    pub params: SeverityParams,
    pub resolved: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_pack: Option<MaskPackRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    pub frames: Vec<String>,
    pub output_digest: String,
}

/// Applies `spec` and builds the matching manifest.
pub fn corrupt_sequence(
    seq: &FrameSequence,
    loc: &SequenceLocation,
    source_path: &Path,
    spec: CorruptionSpec,
    pack: Option<(&MaskPack, &MaskPackRef)>,
) -> Result<(FrameSequence, CorruptionManifest)> {
    let out = apply(seq, &spec, pack.map(|p| p.0)).map_err(IoError::core(source_path))?;
    let manifest = CorruptionManifest {
        source_sequence_id: loc.sequence_id(),
        source_path: source_path.to_string_lossy().into_owned(),
        source_digest: sequence_digest(seq),
        spec,
        engine_version: gaitcorrupt_core::ENGINE_VERSION.to_string(),
        params: out.params,
        resolved: out.resolved,
        mask_pack: if spec.kind == CorruptionKind::Occlusion { pack.map(|p| p.1.clone()) } else { None },
        placement: out.placement,
        frames: (0..out.sequence.len()).map(frame_name).collect(),
        output_digest: sequence_digest(&out.sequence),
    };
    Ok((out.sequence, manifest))
}

/// Re-runs a manifest against its source and returns the new output digest.
pub fn replay(manifest: &CorruptionManifest, source: &FrameSequence, pack: Option<&MaskPack>) -> Result<String> {
    let here = Path::new(&manifest.source_path);
    let digest = sequence_digest(source);
    if digest != manifest.source_digest {
        return Err(IoError::format(here, "source frames differ from the ones recorded in the manifest"));
    }
    let out = apply(source, &manifest.spec, pack).map_err(IoError::core(here))?;
    Ok(sequence_digest(&out.sequence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: usize) -> FrameSequence {
        let frames = (0..t)
            .map(|i| Frame::from_fn(12, 10, |y, x| [(x * 20 + i) as u8, (y * 20) as u8, 7]))
            .collect();
        FrameSequence::new(frames, "s").unwrap()
    }

    #[test]
    fn digest_depends_on_shape_and_pixels() {
        let a = seq(3);
        assert_eq!(sequence_digest(&a), sequence_digest(&seq(3)));
        assert_ne!(sequence_digest(&a), sequence_digest(&seq(4)));
        assert_eq!(sequence_digest(&a).len(), 64);
    }

    #[test]
    fn frame_names_sort_numerically() {
        assert!(frame_name(9) < frame_name(10));
        assert_eq!(frame_name(0), "frame_000000.png");
    }
}
