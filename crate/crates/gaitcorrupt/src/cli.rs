//! Command-line front end. Exit codes: 0 success, 1 partial failure, 2 configuration or usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gaitcorrupt_core::metrics::Distance;
use gaitcorrupt_core::occlusion::MaskPack;
use gaitcorrupt_core::protocols::{MixRatio, SeverityDistribution, DEFAULT_SEEN_KINDS};

use crate::config::{self, FileConfig};
use crate::dataset_io::{self, CorruptionManifest, MaskPackRef};
use crate::error::{IoError, Result};
use crate::pipeline::{self, CorruptConfig, EvaluateConfig};
use crate::report::{self, Comparison, TableMetric};
use crate::{maskpack, protocol_files, synth};

#[derive(Debug, Parser)]
#[command(name = "gaitcorrupt", version, about = "Corrupt gait datasets and score retrieval robustness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write corrupted copies of every sequence for each kind and severity.
    Corrupt(CorruptArgs),
    /// Score clean and perturbed embeddings and write a robustness report.
    Evaluate(EvaluateArgs),
    /// Render one or more reports as comparison tables.
    Report(ReportArgs),
    /// Regenerate a corrupted sequence from its manifest and compare digests.
    Replay(ReplayArgs),
    /// Assign a fixed random corruption to every gallery sequence.
    NoisyGallery(NoisyGalleryArgs),
    /// Mix clean and corrupted sequences at a clean:noisy ratio.
    TrainingMix(TrainingMixArgs),
    /// Build occluder mask packs.
    #[command(subcommand)]
    MaskPack(MaskPackCommand),
    /// Generate synthetic data for trials.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root laid out as identity/condition/view/frames.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving `<root>-<kind>-s<severity>` trees (default: next to the input).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `all` or comma-separated kind names.
    #[arg(long)]
    pub kinds: Option<String>,
    /// `all` or comma-separated levels 1-5.
    #[arg(long)]
    pub severities: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mask_pack: Option<PathBuf>,
    #[arg(long, env = "GAITCORRUPT_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clean embeddings (gallery and probes).
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Directory of `<kind>-s<severity>.csv|.emb` probe embeddings.
    #[arg(long)]
    pub perturbed: Option<PathBuf>,
    /// casia-b, ccpg, sustech1k, mevid, or a protocol JSON file.
    #[arg(long)]
    pub protocol: Option<String>,
    /// euclidean, cosine or normalized-euclidean.
    #[arg(long)]
    pub distance: Option<String>,
    /// Comma-separated ranks, e.g. 1,5,10,20.
    #[arg(long)]
    pub ks: Option<String>,
    /// Embeddings of a corrupted gallery; switches to noisy-gallery mode.
    #[arg(long)]
    pub noisy_gallery: Option<PathBuf>,
    #[arg(long)]
    pub noisy_gallery_manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub extractor: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files; labelled by model name, or file stem when unnamed.
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Markdown)]
    pub format: TableFormat,
    #[arg(long, value_enum, default_value_t = TableMetric::Rank1)]
    pub metric: TableMetric,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A corrupted sequence directory containing manifest.json.
    pub dir: PathBuf,
    /// Override the source path recorded in the manifest.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Override the mask pack path recorded in the manifest.
    #[arg(long)]
    pub mask_pack: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoisyGalleryArgs {
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub protocol: String,
    /// `all`, `seen` (the default training set) or comma-separated names.
    #[arg(long, default_value = "all")]
    pub kinds: String,
    /// Probabilities of severities 1..5, comma-separated.
    #[arg(long, default_value = "0.6,0.3,0.1")]
    pub severity_probs: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Manifest JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the corrupted gallery sequences under this directory.
    #[arg(long)]
    pub materialize: Option<PathBuf>,
    #[arg(long)]
    pub mask_pack: Option<PathBuf>,
    #[arg(long, env = "GAITCORRUPT_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainingMixArgs {
    #[arg(long)]
    pub clean_root: PathBuf,
    #[arg(long)]
    pub noisy_root: PathBuf,
    /// clean:noisy, e.g. 80:20.
    #[arg(long)]
    pub ratio: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum MaskPackCommand {
    /// Write a pack of simple geometric masks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Rasterise COCO polygon annotations into a pack.
    FromCoco {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        min_area: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Walking-figure sequences in the identity/condition/view layout.
    Dataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        identities: usize,
        #[arg(long, default_value = "nm-01,nm-05")]
        conditions: String,
        #[arg(long, default_value = "090")]
        views: String,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Clustered embeddings covering every condition of a protocol.
    Embeddings {
        #[arg(long)]
        protocol: String,
        #[arg(long, default_value_t = 20)]
        identities: usize,
        #[arg(long, default_value = "000,090")]
        views: String,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    path.as_deref().map(FileConfig::load).transpose().map(Option::unwrap_or_default)
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| IoError::Config(format!("missing `{name}` (flag or config file)")))
}

pub fn resolve_corrupt(a: CorruptArgs) -> Result<CorruptConfig> {
    let file = load_config(&a.config)?.corrupt;
    let input = required(a.input.or(file.input), "input")?;
    let kinds = match a.kinds {
        Some(k) => config::parse_kinds(&k)?,
        None => config::resolve_kinds(required(file.kinds, "kinds")?)?,
    };
    let severities = match a.severities {
        Some(s) => config::parse_severities(&s)?,
        None => config::resolve_severities(required(file.severities, "severities")?)?,
    };
    let output = match a.output.or(file.output) {
        Some(o) => o,
        None => input
            .canonicalize()
            .ok()
            .and_then(|p| p.parent().map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    Ok(CorruptConfig {
        input,
        output,
        kinds,
        severities,
        seed: a.seed.or(file.seed).unwrap_or(0),
        mask_pack: a.mask_pack.or(file.mask_pack),
        workers: a.workers.or(file.workers).unwrap_or_else(config::default_workers),
    })
}

pub fn resolve_evaluate(a: EvaluateArgs) -> Result<EvaluateConfig> {
    let file = load_config(&a.config)?.evaluate;
    let distance: Distance = match a.distance.or(file.distance) {
        Some(d) => d.parse().map_err(|e| IoError::Config(format!("{e}")))?,
        None => Distance::default(),
    };
    let ks = match a.ks {
        Some(s) => list(&s)
            .iter()
            .map(|k| k.parse::<usize>().map_err(|_| IoError::Config(format!("bad rank `{k}`"))))
            .collect::<Result<Vec<_>>>()?,
        None => file.ks.unwrap_or_else(|| vec![1, 5, 10, 20]),
    };
    if ks.contains(&0) {
        return Err(IoError::Config("ranks must be positive".into()));
    }
    Ok(EvaluateConfig {
        clean: required(a.clean.or(file.clean), "clean")?,
        perturbed: required(a.perturbed.or(file.perturbed), "perturbed")?,
        protocol: required(a.protocol.or(file.protocol), "protocol")?,
        distance,
        ks,
        noisy_gallery: a.noisy_gallery.or(file.noisy_gallery),
        noisy_gallery_manifest: a.noisy_gallery_manifest.or(file.noisy_gallery_manifest),
        out: required(a.out.or(file.out), "out")?,
        model: a.model.or(file.model).unwrap_or_default(),
        extractor: a.extractor.or(file.extractor).unwrap_or_default(),
        seed: a.seed.or(file.seed),
    })
}

fn corrupt(a: CorruptArgs) -> Result<u8> {
    let cfg = resolve_corrupt(a)?;
    let summary = pipeline::run_corrupt(&cfg)?;
    for f in summary.failures() {
        eprintln!(
            "failed: {} {} s{}: {}",
            f.sequence_id,
            f.kind,
            f.severity,
            f.result.as_ref().err().map_or("", String::as_str)
        );
    }
    let failed = summary.failures().count();
    eprintln!(
        "corrupt: {} sequences, {} outputs written, {} failed, {} workers",
        summary.sequences,
        summary.written(),
        failed,
        cfg.workers
    );
    Ok(u8::from(failed > 0))
}

fn evaluate(a: EvaluateArgs) -> Result<u8> {
    let cfg = resolve_evaluate(a)?;
    let r = pipeline::run_evaluate(&cfg)?;
    eprintln!(
        "evaluate: clean rank-1 {:.2}, {} cells, report in {}",
        r.clean.rank1(),
        r.rows.len(),
        cfg.out.display()
    );
    Ok(0)
}

fn render(a: ReportArgs) -> Result<u8> {
    if a.inputs.is_empty() {
        return Err(IoError::Usage("report needs at least one report JSON".into()));
    }
    let mut inputs = Vec::new();
    for p in &a.inputs {
        let r = report::read_report(p)?;
        let label = if r.metadata.model.is_empty() {
            p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
        } else {
            r.metadata.model.clone()
        };
        inputs.push((label, r));
    }
    let cmp = Comparison::new(inputs)?;
    let kinds = cmp.kind_table(a.metric);
    let fams = cmp.family_table();
    let text = match a.format {
        TableFormat::Markdown => format!("{}\n{}", report::markdown(&kinds), report::markdown(&fams)),
        TableFormat::Csv => format!("{}\n{}", report::csv_text(&kinds)?, report::csv_text(&fams)?),
    };
    match a.out {
        Some(p) => std::fs::write(&p, text).map_err(IoError::io(&p))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn load_pack_ref(p: &Path) -> Result<(MaskPack, MaskPackRef)> {
    let pack = maskpack::load_pack(p).map_err(|e| IoError::Config(format!("mask pack: {e}")))?;
    let r = MaskPackRef { path: maskpack::display_path(p), digest: maskpack::pack_digest(&pack) };
    Ok((pack, r))
}

fn replay(a: ReplayArgs) -> Result<u8> {
    let m: CorruptionManifest = dataset_io::read_json(&a.dir.join(dataset_io::MANIFEST_FILE))?;
    let source = a.source.unwrap_or_else(|| PathBuf::from(&m.source_path));
    let seq = dataset_io::load_sequence(&source)?;
    let pack = match (a.mask_pack, &m.mask_pack) {
        (Some(p), _) => Some(load_pack_ref(&p)?),
        (None, Some(r)) => Some(load_pack_ref(Path::new(&r.path))?),
        (None, None) => None,
    };
    if let (Some((_, now)), Some(then)) = (&pack, &m.mask_pack) {
        if now.digest != then.digest {
            eprintln!("warning: mask pack content differs from the one recorded");
        }
    }
    let digest = dataset_io::replay(&m, &seq, pack.as_ref().map(|p| &p.0))?;
    let on_disk = dataset_io::sequence_digest(&dataset_io::load_sequence(&a.dir)?);
    let ok = digest == m.output_digest && on_disk == m.output_digest;
    println!("{} replay {} (manifest {}, on disk {})", if ok { "ok" } else { "MISMATCH" }, digest, m.output_digest, on_disk);
    Ok(u8::from(!ok))
}

fn noisy_gallery(a: NoisyGalleryArgs) -> Result<u8> {
    let protocol = protocol_files::resolve(&a.protocol)?;
    let kinds = match a.kinds.as_str() {
        "seen" => DEFAULT_SEEN_KINDS.to_vec(),
        k => config::parse_kinds(k)?,
    };
    let probs = list(&a.severity_probs)
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| IoError::Config(format!("bad probability `{p}`"))))
        .collect::<Result<Vec<_>>>()?;
    if probs.len() > 5 {
        return Err(IoError::Config("at most five severity probabilities".into()));
    }
    let pairs: Vec<(u8, f64)> = probs.iter().enumerate().map(|(i, &p)| (i as u8 + 1, p)).collect();
    let dist = SeverityDistribution::from_pairs(&pairs).map_err(|e| IoError::Config(e.to_string()))?;
    let needs_pack = kinds.contains(&gaitcorrupt_core::CorruptionKind::Occlusion);
    let pack = match (&a.materialize, &a.mask_pack) {
        (Some(_), Some(p)) if needs_pack => Some(load_pack_ref(p)?),
        (Some(_), None) if needs_pack => {
            return Err(IoError::Config("occlusion can be assigned but no mask pack was given".into()))
        }
        _ => None,
    };
    let records = pipeline::noisy_gallery_manifest(&a.root, &protocol, &kinds, &dist, a.seed)?;
    dataset_io::write_jsonl(&a.out, &records)?;
    let mut failed = 0;
    if let Some(dir) = &a.materialize {
        let workers = a.workers.unwrap_or_else(config::default_workers);
        for (id, r) in pipeline::materialize(&records, dir, pack.as_ref().map(|(p, r)| (p, r)), workers)? {
            if let Err(e) = r {
                eprintln!("failed: {id}: {e}");
                failed += 1;
            }
        }
    }
    eprintln!("noisy-gallery: {} gallery sequences assigned, {failed} failed", records.len());
    Ok(u8::from(failed > 0))
}

fn training_mix(a: TrainingMixArgs) -> Result<u8> {
    let ratio = MixRatio::parse(&a.ratio).map_err(|e| IoError::Config(e.to_string()))?;
    let mix = pipeline::training_mix(&a.clean_root, &a.noisy_root, ratio, a.seed)?;
    dataset_io::write_jsonl(&a.out, &mix.records)?;
    eprintln!("training-mix: {} of {} sequences replaced", mix.replaced.len(), mix.records.len());
    Ok(0)
}

fn mask_pack(c: MaskPackCommand) -> Result<u8> {
    match c {
        MaskPackCommand::Synth { out, count } => {
            if count < 5 {
                return Err(IoError::Config("a pack needs at least 5 masks".into()));
            }
            maskpack::write_pack(&MaskPack::synthetic(count), &out)?;
            eprintln!("mask-pack: {count} masks written to {}", out.display());
        }
        MaskPackCommand::FromCoco { annotations, out, min_area } => {
            let r = maskpack::pack_from_coco(&annotations, &out, min_area)?;
            eprintln!("mask-pack: {} masks written, {} annotations skipped", r.written, r.skipped);
        }
    }
    Ok(0)
}

fn synth_cmd(c: SynthCommand) -> Result<u8> {
    match c {
        SynthCommand::Dataset { out, identities, conditions, views, frames, height, width, seed } => {
            let ds = synth::SyntheticDataset {
                identities,
                conditions: list(&conditions),
                views: list(&views),
                frames,
                height,
                width,
                seed,
            };
            let n = ds.write(&out)?.len();
            eprintln!("synth: {n} sequences written to {}", out.display());
        }
        SynthCommand::Embeddings { protocol, identities, views, dim, noise, seed, out } => {
            let spec = protocol_files::resolve(&protocol)?;
            let recs = synth::clustered_embeddings(&spec, identities, &list(&views), dim, noise, seed);
            crate::embeddings::write(&out, &recs)?;
            eprintln!("synth: {} embeddings written to {}", recs.len(), out.display());
        }
    }
    Ok(0)
}

pub fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Corrupt(a) => corrupt(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => render(a),
        Command::Replay(a) => replay(a),
        Command::NoisyGallery(a) => noisy_gallery(a),
        Command::TrainingMix(a) => training_mix(a),
        Command::MaskPack(c) => mask_pack(c),
        Command::Synth(c) => synth_cmd(c),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
