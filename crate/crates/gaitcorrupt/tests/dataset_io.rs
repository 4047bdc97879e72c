use std::fs;
use std::io;

use gaitcorrupt::dataset_io::{
    corrupt_sequence, discover_sequences, frame_paths, load_sequence, replay, save_sequence, save_sequence_with,
    sequence_digest, CorruptionManifest, SequenceLocation, MANIFEST_FILE,
};
use gaitcorrupt::synth::walking_sequence;
use gaitcorrupt::IoError;
use gaitcorrupt_core::{CorruptionKind, CorruptionSpec, Frame, FrameSequence, Severity};
use image::{GrayImage, RgbImage};

fn write_rgb(path: &std::path::Path, h: u32, w: u32, v: u8) {
    RgbImage::from_fn(w, h, |x, y| image::Rgb([v, (x % 256) as u8, (y % 256) as u8])).save(path).unwrap();
}

#[test]
fn uniform_directory_loads_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for i in (1..=10).rev() {
        write_rgb(&dir.path().join(format!("{i:04}.png")), 64, 44, i as u8);
    }
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let seq = load_sequence(dir.path()).unwrap();
    assert_eq!((seq.len(), seq.height(), seq.width()), (10, 64, 44));
    for (i, f) in seq.frames().iter().enumerate() {
        assert_eq!(f.pixel(0, 0)[0], i as u8 + 1);
    }
}

#[test]
fn thirty_identical_frames() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..30 {
        write_rgb(&dir.path().join(format!("{i:03}.png")), 64, 44, 9);
    }
    let seq = load_sequence(dir.path()).unwrap();
    assert_eq!(seq.len(), 30);
    assert!(seq.frames().iter().all(|f| f == &seq.frames()[0]));
}

#[test]
fn grayscale_is_expanded() {
    let dir = tempfile::tempdir().unwrap();
    GrayImage::from_fn(5, 4, |x, _| image::Luma([x as u8 * 40])).save(dir.path().join("a.png")).unwrap();
    let seq = load_sequence(dir.path()).unwrap();
    assert_eq!(seq.frames()[0].pixel(2, 3), [120, 120, 120]);
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = load_sequence(dir.path()).unwrap_err();
    assert!(matches!(empty, IoError::Core { source: gaitcorrupt_core::Error::EmptySequence, .. }), "{empty}");
    write_rgb(&dir.path().join("a.png"), 8, 8, 0);
    write_rgb(&dir.path().join("b.png"), 8, 9, 0);
    let mixed = load_sequence(dir.path()).unwrap_err();
    assert!(matches!(mixed, IoError::Core { source: gaitcorrupt_core::Error::DimMismatch { .. }, .. }));
    fs::write(dir.path().join("c.png"), b"not a png").unwrap();
    fs::remove_file(dir.path().join("b.png")).unwrap();
    assert!(matches!(load_sequence(dir.path()).unwrap_err(), IoError::Image { .. }));
    assert!(matches!(load_sequence(&dir.path().join("missing")).unwrap_err(), IoError::Io { .. }));
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let seq = walking_sequence(7, 40, 30, 11);
    let out = dir.path().join("a/b/c");
    save_sequence(&seq, &out, &serde_json::json!({"digest": sequence_digest(&seq)})).unwrap();
    let back = load_sequence(&out).unwrap();
    assert_eq!(back.frames(), seq.frames());
    assert_eq!(sequence_digest(&back), sequence_digest(&seq));
    let names: Vec<String> =
        frame_paths(&out).unwrap().iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names[0], "frame_000000.png");
    assert!(out.join(MANIFEST_FILE).is_file());
    // Saving again replaces the old output.
    let shorter = FrameSequence::new(seq.frames()[..2].to_vec(), "x").unwrap();
    save_sequence(&shorter, &out, &()).unwrap();
    assert_eq!(load_sequence(&out).unwrap().len(), 2);
}

#[test]
fn interrupted_save_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let seq = walking_sequence(6, 16, 16, 1);
    let out = dir.path().join("seq");
    let err = save_sequence_with(&seq, &out, &(), |i| {
        if i == 3 {
            Err(io::Error::new(io::ErrorKind::Interrupted, "stop"))
        } else {
            Ok(())
        }
    });
    assert!(err.is_err());
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0, "temp directory left behind");
}

#[test]
fn manifest_digest_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let src_dir = dir.path().join("src");
    let seq = walking_sequence(8, 32, 32, 5);
    save_sequence(&seq, &src_dir, &()).unwrap();
    let seq = load_sequence(&src_dir).unwrap();
    let loc = SequenceLocation { identity: "001".into(), condition: "nm-01".into(), view: "090".into() };
    for kind in CorruptionKind::ALL.into_iter().filter(|&k| k != CorruptionKind::Occlusion) {
        let spec = CorruptionSpec::new(kind, Severity::new(3).unwrap(), 77);
        let (out, manifest) = corrupt_sequence(&seq, &loc, &src_dir, spec, None).unwrap();
        let dst = dir.path().join(kind.name());
        save_sequence(&out, &dst, &manifest).unwrap();
        let reread: CorruptionManifest = serde_json::from_slice(&fs::read(dst.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(reread, manifest);
        assert_eq!(sequence_digest(&load_sequence(&dst).unwrap()), manifest.output_digest);
        assert_eq!(replay(&reread, &seq, None).unwrap(), manifest.output_digest);
        assert!(!manifest.resolved.is_empty());
    }
    let other = FrameSequence::new(vec![Frame::filled(32, 32, 0); 8], "z").unwrap();
    let spec = CorruptionSpec::new(CorruptionKind::Fog, Severity::new(1).unwrap(), 1);
    let (_, m) = corrupt_sequence(&seq, &loc, &src_dir, spec, None).unwrap();
    assert!(replay(&m, &other, None).is_err());
}

#[test]
fn discovery_follows_layout() {
    let dir = tempfile::tempdir().unwrap();
    let seq = walking_sequence(2, 8, 8, 1);
    for (id, cond, view) in [("002", "nm-01", "000"), ("001", "bg-01", "090"), ("001", "nm-01", "000")] {
        save_sequence(&seq, &dir.path().join(id).join(cond).join(view), &()).unwrap();
    }
    fs::create_dir_all(dir.path().join("003/nm-01/000")).unwrap();
    let ids: Vec<String> = discover_sequences(dir.path()).unwrap().iter().map(|l| l.sequence_id()).collect();
    assert_eq!(ids, ["001/bg-01/090", "001/nm-01/000", "002/nm-01/000"]);
}
