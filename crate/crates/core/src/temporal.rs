//! Sequence-level corruptions: frame freezes and frame-rate reduction.
//!
//! Both keep the sequence length, and every output frame is a copy of some
//! input frame.

use alloc::vec::Vec;

use crate::frame::{round_half_away, FrameSequence};
use crate::rng::SeededRng;
use crate::severity::{severity_params, CorruptionKind, Severity, SeverityParams};

/// Number of frames `freeze` replaces: `max(1, round(p * T))`, capped at `T - 1`.
pub fn freeze_count(fraction: f64, len: usize) -> usize {
    let k = (round_half_away(fraction * len as f64) as usize).max(1);
    k.min(len.saturating_sub(1))
}

/// Indices (ascending) that `freeze` overwrites with the preceding output frame.
pub fn freeze_indices(len: usize, fraction: f64, rng: &SeededRng) -> Vec<usize> {
    if len < 2 {
        return Vec::new();
    }
    let k = freeze_count(fraction, len);
    let mut picks: Vec<usize> = rng
        .sequence_stream()
        .choose_distinct(len - 1, k)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    picks.sort_unstable();
    picks
}

/// Holds the previous frame at randomly drawn positions. Consecutive drawn
/// positions extend the hold. Frame 0 is never replaced; single-frame
/// sequences are returned unchanged.
pub fn freeze(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::Freeze { fraction } = severity_params(CorruptionKind::Freeze, severity) else {
        unreachable!()
    };
    let mut frames = seq.frames().to_vec();
    for i in freeze_indices(frames.len(), fraction, rng) {
        frames[i] = frames[i - 1].clone();
    }
    seq.with_frames(frames)
}

/// Source index for output frame `t` when keeping every `rate`-th frame.
#[inline]
pub fn sampling_source(t: usize, rate: usize) -> usize {
    (t / rate) * rate
}

pub fn sampling_with_rate(seq: &FrameSequence, rate: usize) -> FrameSequence {
    assert!(rate > 0, "sampling rate must be positive");
    let frames = (0..seq.len()).map(|t| seq.frames()[sampling_source(t, rate)].clone()).collect();
    seq.with_frames(frames)
}

/// Keeps frames `0, n, 2n, ...` and repeats each to restore the length.
pub fn sampling(seq: &FrameSequence, severity: Severity) -> FrameSequence {
    let SeverityParams::Sampling { rate } = severity_params(CorruptionKind::Sampling, severity) else {
        unreachable!()
    };
    sampling_with_rate(seq, rate)
}
