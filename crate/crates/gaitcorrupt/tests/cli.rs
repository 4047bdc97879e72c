use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaitcorrupt::dataset_io::{self, MANIFEST_FILE};
use gaitcorrupt::pipeline::{run_corrupt, CorruptConfig};
use gaitcorrupt::report::read_report;
use gaitcorrupt::synth::SyntheticDataset;
use gaitcorrupt_core::metrics::GalleryMode;
use gaitcorrupt_core::protocols::ManifestRecord;
use gaitcorrupt_core::{CorruptionKind, Severity};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitcorrupt")).args(args).env_remove("GAITCORRUPT_WORKERS").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dataset(root: &Path, ids: usize) -> PathBuf {
    let data = root.join("data");
    SyntheticDataset {
        identities: ids,
        conditions: vec!["nm-01".into(), "nm-05".into()],
        views: vec!["090".into()],
        frames: 6,
        height: 24,
        width: 24,
        seed: 3,
    }
    .write(&data)
    .unwrap();
    data
}

#[test]
fn occlusion_without_pack_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 1);
    let out = dir.path().join("out");
    let o = bin(&["corrupt", "--input", s(&data), "--output", s(&out), "--kinds", "fog,occlusion"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(bin(&["corrupt", "--kinds", "fogg", "--input", "."]).status.code(), Some(2));
    assert_eq!(bin(&["report"]).status.code(), Some(2));
    assert_eq!(bin(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[corrupt]\ncolour = 1\n").unwrap();
    assert_eq!(bin(&["corrupt", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn corrupt_writes_layout_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 2);
    let packdir = dir.path().join("pack");
    assert!(bin(&["mask-pack", "synth", "--out", s(&packdir), "--count", "8"]).status.success());
    let o = bin(&[
        "corrupt", "--input", s(&data), "--kinds", "fog,occlusion,freeze", "--severities", "2", "--seed", "9",
        "--mask-pack", s(&packdir), "--workers", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cell = dir.path().join("data-occlusion-s2/001/nm-01/090");
    assert!(cell.join(MANIFEST_FILE).is_file());
    assert!(cell.join("frame_000005.png").is_file());
    let r = bin(&["replay", s(&cell)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
    assert!(String::from_utf8_lossy(&r.stdout).starts_with("ok"));
    // Tampering with a frame is detected.
    let f = cell.join("frame_000000.png");
    let mut img = image::open(&f).unwrap().to_rgb8();
    img.get_pixel_mut(0, 0).0[0] ^= 1;
    img.save(&f).unwrap();
    assert_eq!(bin(&["replay", s(&cell)]).status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 2);
    let run = |workers: usize, out: &str| {
        let cfg = CorruptConfig {
            input: data.clone(),
            output: dir.path().join(out),
            kinds: vec![CorruptionKind::GaussianNoise, CorruptionKind::Rain, CorruptionKind::Sampling],
            severities: vec![Severity::new(1).unwrap(), Severity::new(5).unwrap()],
            seed: 42,
            mask_pack: None,
            workers,
        };
        let mut d: Vec<(String, CorruptionKind, Severity, String)> = run_corrupt(&cfg)
            .unwrap()
            .outcomes
            .into_iter()
            .map(|o| (o.sequence_id, o.kind, o.severity, o.result.unwrap()))
            .collect();
        d.sort();
        d
    };
    let one = run(1, "a");
    assert_eq!(one.len(), 4 * 3 * 2);
    assert_eq!(one, run(4, "b"));
}

fn write_cells(dir: &Path, kinds: &[&str], src: &Path) {
    fs::create_dir_all(dir).unwrap();
    for k in kinds {
        for sev in [1, 3] {
            fs::copy(src, dir.join(format!("{k}-s{sev}.csv"))).unwrap();
        }
    }
}

#[test]
fn evaluate_identity_and_noisy_gallery() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.csv");
    let o = bin(&["synth", "embeddings", "--protocol", "casia-b", "--identities", "6", "--out", s(&clean)]);
    assert!(o.status.success());
    let pert = dir.path().join("pert");
    write_cells(&pert, &["fog", "gaussian-noise"], &clean);
    fs::write(pert.join("README.txt"), "x").unwrap();
    let out = dir.path().join("rep");
    let o = bin(&[
        "evaluate", "--clean", s(&clean), "--perturbed", s(&pert), "--protocol", "casia-b", "--out", s(&out),
        "--model", "m1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_report(&out.join("report.json")).unwrap();
    assert_eq!(rep.rows.len(), 4);
    assert_eq!(rep.metadata.gallery_mode, GalleryMode::Clean);
    for r in &rep.rows {
        assert_eq!((r.delta_a, r.delta_r), (1.0, 1.0));
    }
    assert!(out.join("report.csv").is_file());

    let manifest = dir.path().join("ng.jsonl");
    fs::write(&manifest, "[]").unwrap();
    let out2 = dir.path().join("rep2");
    let o = bin(&[
        "evaluate", "--clean", s(&clean), "--perturbed", s(&pert), "--protocol", "casia-b", "--out", s(&out2),
        "--noisy-gallery", s(&clean), "--noisy-gallery-manifest", s(&manifest), "--model", "m2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep2 = read_report(&out2.join("report.json")).unwrap();
    assert_eq!(rep2.metadata.gallery_mode, GalleryMode::Noisy);
    assert!(rep2.metadata.config.contains_key("noisy_gallery_manifest_sha256"));

    // Clean and noisy-gallery reports refuse to merge into one table.
    let o = bin(&["report", s(&out.join("report.json")), s(&out2.join("report.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["report", s(&out.join("report.json")), s(&out.join("report.json")), "--metric", "delta-a"]);
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("Fog") || table.contains("fog"), "{table}");

    // Unknown conditions are rejected.
    let bad = dir.path().join("bad.csv");
    let mut text = fs::read_to_string(&clean).unwrap();
    text.push_str(&text.lines().nth(1).unwrap().replacen("nm-0", "zz-0", 1));
    text.push('\n');
    fs::write(&bad, text).unwrap();
    let o = bin(&["evaluate", "--clean", s(&bad), "--perturbed", s(&pert), "--protocol", "casia-b", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zz-0"));
}

#[test]
fn noisy_gallery_and_training_mix_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 4);
    let ng = dir.path().join("ng.jsonl");
    let mat = dir.path().join("ng-data");
    let o = bin(&[
        "noisy-gallery", "--root", s(&data), "--protocol", "sustech1k", "--kinds", "fog,rain", "--seed", "5",
        "--out", s(&ng), "--materialize", s(&mat), "--workers", "2",
    ]);
    // sustech1k has no nm-* conditions, so its gallery is empty.
    assert_eq!(o.status.code(), Some(2));
    assert!(!mat.exists());

    let cfg = dir.path().join("p.json");
    fs::write(&cfg, r#"{"dataset":"custom","gallery_conditions":["nm-01"],"probe_conditions":["nm-05"]}"#).unwrap();
    let o = bin(&[
        "noisy-gallery", "--root", s(&data), "--protocol", s(&cfg), "--kinds", "fog,rain", "--seed", "5",
        "--out", s(&ng), "--materialize", s(&mat),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs: Vec<ManifestRecord> = dataset_io::read_jsonl(&ng).unwrap();
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| r.condition == "nm-01" && r.corruption.is_some()));

    let noisy = dir.path().join("noisy");
    assert!(bin(&["corrupt", "--input", s(&data), "--output", s(&noisy), "--kinds", "gaussian-noise", "--severities", "2"])
        .status
        .success());
    let noisy_root = noisy.join("data-gaussian_noise-s2");
    let mix = dir.path().join("mix.jsonl");
    let o = bin(&[
        "training-mix", "--clean-root", s(&data), "--noisy-root", s(&noisy_root), "--ratio", "50:50", "--out",
        s(&mix),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs: Vec<ManifestRecord> = dataset_io::read_jsonl(&mix).unwrap();
    assert_eq!(recs.len(), 8);
    assert_eq!(recs.iter().filter(|r| r.corruption.is_some()).count(), 4);
    assert_eq!(bin(&["training-mix", "--clean-root", s(&data), "--noisy-root", s(&noisy_root), "--ratio", "5:5:5", "--out", s(&mix)]).status.code(), Some(2));
}
