//! Batch corruption, evaluation and comparison runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gaitcorrupt_core::metrics::{
    evaluate, Distance, EmbeddingRecord, GalleryMode, ReportMetadata, RetrievalScores, RobustnessReport,
};
use gaitcorrupt_core::occlusion::MaskPack;
use gaitcorrupt_core::protocols::{
    build_noisy_gallery, build_training_mix, split, CorruptionTag, ManifestRecord, MixRatio, ProtocolSpec,
    SeverityDistribution, Split, TrainingMix,
};
use gaitcorrupt_core::rng::derive_cell_seed;
use gaitcorrupt_core::{CorruptionKind, CorruptionSpec, Severity};
use rayon::prelude::*;

use crate::dataset_io::{corrupt_sequence, corrupted_root, load_sequence, save_sequence, MaskPackRef, SequenceLocation};
use crate::error::{IoError, Result};
use crate::{dataset_io, embeddings, maskpack, protocol_files};

/// Fully resolved `corrupt` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<Severity>,
    pub seed: u64,
    pub mask_pack: Option<PathBuf>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellOutcome {
    pub sequence_id: String,
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub output: PathBuf,
    /// Output digest, or the error message.
    pub result: std::result::Result<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptSummary {
    pub sequences: usize,
    pub outcomes: Vec<CellOutcome>,
}

impl CorruptSummary {
    pub fn failures(&self) -> impl Iterator<Item = &CellOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }

    pub fn written(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_ok()).count()
    }
}

fn root_name(p: &Path) -> String {
    fs::canonicalize(p)
        .ok()
        .and_then(|c| c.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "dataset".into())
}

/// Checks everything that can be checked before touching the data.
type Prepared = (Vec<SequenceLocation>, Option<(MaskPack, MaskPackRef)>);

fn prepare_corrupt(cfg: &CorruptConfig) -> Result<Prepared> {
    if cfg.kinds.is_empty() || cfg.severities.is_empty() {
        return Err(IoError::Config("nothing to do: empty kind or severity selection".into()));
    }
    if cfg.workers == 0 {
        return Err(IoError::Config("workers must be at least 1".into()));
    }
    let needs_pack = cfg.kinds.contains(&CorruptionKind::Occlusion);
    if needs_pack && cfg.mask_pack.is_none() {
        return Err(IoError::Config("occlusion requested but no mask pack was given".into()));
    }
    if !cfg.input.is_dir() {
        return Err(IoError::Config(format!("input root {} is not a directory", cfg.input.display())));
    }
    let pack = match (&cfg.mask_pack, needs_pack) {
        (Some(p), true) => {
            let pack = maskpack::load_pack(p).map_err(|e| IoError::Config(format!("mask pack: {e}")))?;
            if pack.len() < 5 {
                return Err(IoError::Config(format!("mask pack has {} masks; at least 5 are needed", pack.len())));
            }
            let r = MaskPackRef { path: maskpack::display_path(p), digest: maskpack::pack_digest(&pack) };
            Some((pack, r))
        }
        _ => None,
    };
    let locations = dataset_io::discover_sequences(&cfg.input)?;
    if locations.is_empty() {
        return Err(IoError::Config(format!(
            "no identity/condition/view sequences under {}",
            cfg.input.display()
        )));
    }
    Ok((locations, pack))
}

/// Corrupts every (sequence, kind, severity) cell. Configuration problems
/// fail before any output is written; per-cell failures are collected.
pub fn run_corrupt(cfg: &CorruptConfig) -> Result<CorruptSummary> {
    let (locations, pack) = prepare_corrupt(cfg)?;
    let root = root_name(&cfg.input);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| IoError::Config(format!("worker pool: {e}")))?;
    let cells: Vec<(CorruptionKind, Severity)> =
        cfg.kinds.iter().flat_map(|&k| cfg.severities.iter().map(move |&s| (k, s))).collect();
    let outcomes: Vec<Vec<CellOutcome>> = pool.install(|| {
        locations
            .par_iter()
            .map(|loc| {
                let src = loc.under(&cfg.input);
                let seq = load_sequence(&src);
                cells
                    .par_iter()
                    .map(|&(kind, severity)| {
                        let output = loc.under(&corrupted_root(&cfg.output, &root, kind, severity));
                        let result = seq.as_ref().map_err(|e| e.to_string()).and_then(|seq| {
                            let seed = derive_cell_seed(cfg.seed, &loc.sequence_id(), kind.ordinal(), severity.level());
                            let spec = CorruptionSpec::new(kind, severity, seed);
                            let p = pack.as_ref().map(|(p, r)| (p, r));
                            corrupt_sequence(seq, loc, &src, spec, p)
                                .and_then(|(out, m)| save_sequence(&out, &output, &m).map(|_| m.output_digest))
                                .map_err(|e| e.to_string())
                        });
                        CellOutcome { sequence_id: loc.sequence_id(), kind, severity, output, result }
                    })
                    .collect()
            })
            .collect()
    });
    Ok(CorruptSummary { sequences: locations.len(), outcomes: outcomes.into_iter().flatten().collect() })
}

/// Fully resolved `evaluate` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateConfig {
    pub clean: PathBuf,
    pub perturbed: PathBuf,
    pub protocol: String,
    pub distance: Distance,
    pub ks: Vec<usize>,
    pub noisy_gallery: Option<PathBuf>,
    pub noisy_gallery_manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub model: String,
    pub extractor: String,
    pub seed: Option<u64>,
}

/// Parses `<kind>-s<severity>` file stems.
pub fn parse_cell(stem: &str) -> Option<(CorruptionKind, Severity)> {
    let (kind, sev) = stem.rsplit_once("-s")?;
    Some((kind.parse().ok()?, Severity::new(sev.parse().ok()?).ok()?))
}

fn is_embedding_file(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "emb" | "bin"))
}

/// Embedding files keyed by (kind ordinal, severity).
pub type CellFiles = BTreeMap<(usize, Severity), (CorruptionKind, PathBuf)>;

/// Perturbed embedding files in `dir`, keyed by cell; unrecognised names are returned separately.
pub fn perturbed_files(dir: &Path) -> Result<(CellFiles, Vec<PathBuf>)> {
    let mut cells = BTreeMap::new();
    let mut ignored = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| IoError::Config(format!("perturbed directory {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(IoError::io(dir))?.path();
        if !path.is_file() || !is_embedding_file(&path) {
            continue;
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match parse_cell(&stem) {
            Some((k, s)) => {
                if let Some((_, prev)) = cells.insert((k.ordinal(), s), (k, path.clone())) {
                    return Err(IoError::Config(format!(
                        "two embedding files for {k} s{s}: {} and {}",
                        prev.display(),
                        path.display()
                    )));
                }
            }
            None => ignored.push(path),
        }
    }
    Ok((cells, ignored))
}

fn split_checked(records: &[EmbeddingRecord], spec: &ProtocolSpec, what: &Path) -> Result<Split<EmbeddingRecord>> {
    let s = split(records, spec).map_err(|e| IoError::Config(format!("{}: {e}", what.display())))?;
    if !s.unknown_conditions.is_empty() {
        return Err(IoError::Config(format!(
            "{}: conditions not in the {} protocol: {}",
            what.display(),
            spec.dataset.name(),
            s.unknown_conditions.join(", ")
        )));
    }
    Ok(s)
}

fn probe_only(records: &[EmbeddingRecord], spec: &ProtocolSpec, what: &Path) -> Result<Vec<EmbeddingRecord>> {
    let mut probes = Vec::new();
    let mut unknown = std::collections::BTreeSet::new();
    for r in records {
        let c = r.condition.as_str();
        if spec.gallery_conditions.iter().any(|g| g == c) {
            continue;
        }
        if spec.probe_conditions.iter().any(|p| p == c) {
            probes.push(r.clone());
        } else {
            unknown.insert(c.to_string());
        }
    }
    if !unknown.is_empty() {
        return Err(IoError::Config(format!(
            "{}: conditions not in the {} protocol: {}",
            what.display(),
            spec.dataset.name(),
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    if probes.is_empty() {
        return Err(IoError::Config(format!("{}: no probe records", what.display())));
    }
    Ok(probes)
}

/// Scores clean and perturbed probes, writes `report.json` and `report.csv`
/// under `cfg.out` and returns the report.
///
/// The clean baseline always uses the clean gallery. Perturbed cells use the
/// noisy gallery when one is configured.
pub fn run_evaluate(cfg: &EvaluateConfig) -> Result<RobustnessReport> {
    let protocol = protocol_files::resolve(&cfg.protocol)?;
    if cfg.noisy_gallery_manifest.is_some() && cfg.noisy_gallery.is_none() {
        return Err(IoError::Config("a noisy-gallery manifest needs noisy-gallery embeddings".into()));
    }
    let (cells, ignored) = perturbed_files(&cfg.perturbed)?;
    for p in &ignored {
        eprintln!("warning: ignoring {} (name is not <kind>-s<severity>)", p.display());
    }
    if cells.is_empty() {
        return Err(IoError::Config(format!("no <kind>-s<severity> embedding files in {}", cfg.perturbed.display())));
    }
    let clean = embeddings::read(&cfg.clean)?;
    let clean_split = split_checked(&clean, &protocol, &cfg.clean)?;
    let clean_scores = evaluate(&clean_split.probe, &clean_split.gallery, &cfg.ks, cfg.distance)
        .map_err(IoError::core(&cfg.clean))?;

    let (gallery, mode, manifest_digest) = match &cfg.noisy_gallery {
        Some(p) => {
            let noisy = embeddings::read(p)?;
            let g: Vec<EmbeddingRecord> =
                noisy.into_iter().filter(|r| protocol.gallery_conditions.contains(&r.condition)).collect();
            if g.is_empty() {
                return Err(IoError::Config(format!("{}: no gallery records", p.display())));
            }
            let digest = cfg.noisy_gallery_manifest.as_deref().map(dataset_io::file_digest).transpose()?;
            (g, GalleryMode::Noisy, digest)
        }
        None => (clean_split.gallery.clone(), GalleryMode::Clean, None),
    };

    let mut rows: Vec<(CorruptionKind, Severity, RetrievalScores)> = Vec::new();
    for ((_, sev), (kind, path)) in &cells {
        let recs = embeddings::read(path)?;
        let probes = probe_only(&recs, &protocol, path)?;
        let scores = evaluate(&probes, &gallery, &cfg.ks, cfg.distance).map_err(IoError::core(path))?;
        rows.push((*kind, *sev, scores));
    }

    let mut config = BTreeMap::new();
    config.insert("clean".into(), cfg.clean.display().to_string());
    config.insert("perturbed".into(), cfg.perturbed.display().to_string());
    config.insert("ks".into(), format!("{:?}", cfg.ks));
    config.insert("gallery_conditions".into(), protocol.gallery_conditions.join(","));
    config.insert("probe_conditions".into(), protocol.probe_conditions.join(","));
    config.insert("excluded_records".into(), clean_split.excluded.to_string());
    config.insert("ambiguous_condition_records".into(), clean_split.ambiguous.to_string());
    config.insert("baseline_gallery".into(), "clean".into());
    if let Some(p) = &cfg.noisy_gallery {
        config.insert("noisy_gallery".into(), p.display().to_string());
    }
    if let Some(d) = &manifest_digest {
        config.insert("noisy_gallery_manifest_sha256".into(), d.clone());
    }
    config.insert("engine_version".into(), gaitcorrupt_core::ENGINE_VERSION.into());
    let metadata = ReportMetadata {
        model: cfg.model.clone(),
        extractor: cfg.extractor.clone(),
        protocol: protocol.dataset.name().to_string(),
        distance: cfg.distance,
        gallery_mode: mode,
        noisy_gallery_manifest: cfg.noisy_gallery_manifest.as_ref().map(|p| p.display().to_string()),
        seed: cfg.seed,
        aggregation: String::new(),
        config,
    };
    let report = RobustnessReport::build(metadata, clean_scores, rows).map_err(IoError::core(&cfg.clean))?;
    report.verify(1e-12).map_err(IoError::core(&cfg.out))?;
    fs::create_dir_all(&cfg.out).map_err(IoError::io(&cfg.out))?;
    crate::report::write_report_json(&cfg.out.join("report.json"), &report)?;
    crate::report::write_report_csv(&cfg.out.join("report.csv"), &report)?;
    Ok(report)
}

/// One manifest record per sequence under `root`. When a sequence directory
/// carries a corruption manifest, its spec becomes the record's tag.
pub fn dataset_manifest(root: &Path) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for loc in dataset_io::discover_sequences(root)? {
        let dir = loc.under(root);
        let m = dir.join(dataset_io::MANIFEST_FILE);
        let corruption = if m.is_file() {
            serde_json::from_slice::<dataset_io::CorruptionManifest>(&fs::read(&m).map_err(IoError::io(&m))?)
                .ok()
                .map(|c| CorruptionTag { kind: c.spec.kind, severity: c.spec.severity, seed: c.spec.seed })
        } else {
            None
        };
        out.push(ManifestRecord {
            sequence_id: loc.sequence_id(),
            identity: loc.identity,
            condition: loc.condition,
            view: loc.view,
            path: dir.display().to_string(),
            corruption,
        });
    }
    Ok(out)
}

/// Assigns one corruption to every gallery sequence of `root` under `protocol`.
pub fn noisy_gallery_manifest(
    root: &Path,
    protocol: &ProtocolSpec,
    kinds: &[CorruptionKind],
    dist: &SeverityDistribution,
    seed: u64,
) -> Result<Vec<ManifestRecord>> {
    let records = dataset_manifest(root)?;
    let gallery: Vec<ManifestRecord> =
        records.into_iter().filter(|r| protocol.gallery_conditions.contains(&r.condition)).collect();
    build_noisy_gallery(&gallery, kinds, dist, seed).map_err(|e| IoError::Config(format!("{}: {e}", root.display())))
}

/// Writes the corrupted sequence for every tagged record to `out/identity/condition/view`.
pub fn materialize(
    records: &[ManifestRecord],
    out: &Path,
    pack: Option<(&MaskPack, &MaskPackRef)>,
    workers: usize,
) -> Result<Vec<(String, std::result::Result<String, String>)>> {
    if records.iter().any(|r| r.corruption.is_some_and(|c| c.kind == CorruptionKind::Occlusion)) && pack.is_none() {
        return Err(IoError::Config("the manifest assigns occlusion but no mask pack was given".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| IoError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        records
            .par_iter()
            .filter_map(|r| r.corruption.map(|c| (r, c)))
            .map(|(r, c)| {
                let loc = SequenceLocation {
                    identity: r.identity.clone(),
                    condition: r.condition.clone(),
                    view: r.view.clone(),
                };
                let src = PathBuf::from(&r.path);
                let res = load_sequence(&src)
                    .and_then(|seq| {
                        let spec = CorruptionSpec::new(c.kind, c.severity, c.seed);
                        corrupt_sequence(&seq, &loc, &src, spec, pack)
                    })
                    .and_then(|(seq, m)| save_sequence(&seq, &loc.under(out), &m).map(|_| m.output_digest))
                    .map_err(|e| e.to_string());
                (r.sequence_id.clone(), res)
            })
            .collect()
    }))
}

/// Mixes the sequences of a clean and a corrupted tree at `ratio`.
pub fn training_mix(clean_root: &Path, noisy_root: &Path, ratio: MixRatio, seed: u64) -> Result<TrainingMix> {
    let clean = dataset_manifest(clean_root)?;
    let noisy = dataset_manifest(noisy_root)?;
    build_training_mix(&clean, &noisy, ratio, seed).map_err(|e| IoError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_names() {
        assert_eq!(parse_cell("gaussian_noise-s3"), Some((CorruptionKind::GaussianNoise, Severity::new(3).unwrap())));
        assert_eq!(parse_cell("zoom-in-s5"), Some((CorruptionKind::ZoomIn, Severity::new(5).unwrap())));
        assert_eq!(parse_cell("fog-s6"), None);
        assert_eq!(parse_cell("clean"), None);
    }
}
