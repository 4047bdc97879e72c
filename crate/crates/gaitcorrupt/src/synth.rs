//! Synthetic walking-figure sequences and clustered embeddings, for smoke
//! tests and demos.

use std::path::Path;

use gaitcorrupt_core::metrics::EmbeddingRecord;
use gaitcorrupt_core::protocols::ProtocolSpec;
use gaitcorrupt_core::rng::{fnv1a, mix_seed};
use gaitcorrupt_core::{Frame, FrameSequence, SeededRng};

use crate::dataset_io::{discover_sequences, save_sequence, SequenceLocation, SequenceManifest};
use crate::error::Result;

/// A figure built from ellipses crossing the frame with swinging legs over a
/// textured background. Everything depends only on `seed`.
pub fn walking_sequence(frames: usize, height: usize, width: usize, seed: u64) -> FrameSequence {
    let mut rng = SeededRng::new(seed);
    let body = [rng.below(200) as u8 + 30, rng.below(200) as u8 + 30, rng.below(200) as u8 + 30];
    let bg_phase = rng.uniform_range(0.0, std::f64::consts::TAU);
    let stride = rng.uniform_range(0.25, 0.45);
    let scale = rng.uniform_range(0.75, 0.95) * height as f64;
    let speed = rng.uniform_range(0.3, 0.7) * width as f64 / frames.max(1) as f64;
    let start = rng.uniform_range(0.15, 0.35) * width as f64;
    let out = (0..frames)
        .map(|t| {
            let cx = start + speed * t as f64;
            let swing = (t as f64 * stride * 2.0).sin();
            let top = (height as f64 - scale) / 2.0;
            let head = (cx, top + 0.1 * scale, 0.07 * scale);
            let torso = (cx, top + 0.38 * scale, 0.09 * scale, 0.2 * scale);
            Frame::from_fn(height, width, |y, x| {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                let inside_ellipse =
                    |cx: f64, cy: f64, rx: f64, ry: f64| ((fx - cx) / rx).powi(2) + ((fy - cy) / ry).powi(2) <= 1.0;
                let leg = |dir: f64| {
                    let hip = (cx, top + 0.58 * scale);
                    let len = 0.4 * scale;
                    let ang = dir * swing * 0.45;
                    let (ex, ey) = (hip.0 + len * ang.sin(), hip.1 + len * ang.cos());
                    let (vx, vy) = (ex - hip.0, ey - hip.1);
                    let u = (((fx - hip.0) * vx + (fy - hip.1) * vy) / (len * len)).clamp(0.0, 1.0);
                    let (px, py) = (hip.0 + u * vx - fx, hip.1 + u * vy - fy);
                    px * px + py * py <= (0.045 * scale).powi(2)
                };
                if inside_ellipse(head.0, head.1, head.2, head.2)
                    || inside_ellipse(torso.0, torso.1, torso.2, torso.3)
                    || leg(1.0)
                    || leg(-1.0)
                {
                    body
                } else {
                    let v = 90.0 + 40.0 * ((x as f64 * 0.21 + bg_phase).sin() * (y as f64 * 0.13).cos());
                    [v as u8, (v * 0.9) as u8, (v * 1.1).min(255.0) as u8]
                }
            })
        })
        .collect();
    FrameSequence::new(out, format!("synthetic-{seed:016x}")).expect("frames share one shape")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticDataset {
    pub identities: usize,
    pub conditions: Vec<String>,
    pub views: Vec<String>,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

impl SyntheticDataset {
    /// Writes `root/identity/condition/view/frame_*.png` trees with a manifest per sequence.
    pub fn write(&self, root: &Path) -> Result<Vec<SequenceLocation>> {
        for id in 0..self.identities {
            for cond in &self.conditions {
                for view in &self.views {
                    let loc = SequenceLocation {
                        identity: format!("{:03}", id + 1),
                        condition: cond.clone(),
                        view: view.clone(),
                    };
                    let seed = mix_seed(self.seed, fnv1a(loc.sequence_id().as_bytes()));
                    let seq = walking_sequence(self.frames, self.height, self.width, seed);
                    let dir = loc.under(root);
                    let manifest = SequenceManifest {
                        sequence_id: loc.sequence_id(),
                        identity: loc.identity.clone(),
                        condition: loc.condition.clone(),
                        view: loc.view.clone(),
                        frames: (0..seq.len()).map(crate::dataset_io::frame_name).collect(),
                        digest: crate::dataset_io::sequence_digest(&seq),
                    };
                    save_sequence(&seq, &dir, &manifest)?;
                }
            }
        }
        discover_sequences(root)
    }
}

/// One embedding per (identity, condition, view) drawn around a per-identity
/// centre with isotropic Gaussian spread `noise`.
pub fn clustered_embeddings(
    protocol: &ProtocolSpec,
    identities: usize,
    views: &[String],
    dim: usize,
    noise: f64,
    seed: u64,
) -> Vec<EmbeddingRecord> {
    let root = SeededRng::new(seed);
    let mut conditions: Vec<&String> = protocol.gallery_conditions.iter().chain(&protocol.probe_conditions).collect();
    let mut seen = std::collections::BTreeSet::new();
    conditions.retain(|c| seen.insert(c.as_str()));
    let mut out = Vec::new();
    for id in 0..identities {
        let mut crng = root.child(id as u64);
        let centre: Vec<f64> = (0..dim).map(|_| crng.standard_normal()).collect();
        for (ci, cond) in conditions.iter().enumerate() {
            for (vi, view) in views.iter().enumerate() {
                let mut r = root.child(mix_seed(id as u64, (ci * 1000 + vi) as u64));
                let v = centre.iter().map(|c| c + noise * r.standard_normal()).collect();
                out.push(EmbeddingRecord::new(format!("{:03}", id + 1), cond.as_str(), view.as_str(), v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walking_sequence_is_deterministic_and_moves() {
        let a = walking_sequence(6, 48, 40, 3);
        assert_eq!(a, walking_sequence(6, 48, 40, 3));
        assert_ne!(a.frames()[0], a.frames()[5]);
        assert_ne!(a, walking_sequence(6, 48, 40, 4));
    }
}
