//! Camera and sensor corruptions: four noise models, three blurs and a
//! progressive zoom-in.
//!
//! Per-frame randomness comes from `rng.child(frame_index)`, so each frame can
//! be processed independently and in any order.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::{denormalize, normalize, to_u8, to_unit, Frame, FrameSequence, RealFrame, CHANNELS};
use crate::rng::SeededRng;
use crate::sample::{bilinear, correlate, Border, Tap};
use crate::severity::{severity_params, CorruptionKind, Severity, SeverityParams};

/// Step between consecutive zoom factors in [`zoom_blur`].
pub const ZOOM_BLUR_STEP: f64 = 0.01;

fn params(kind: CorruptionKind, severity: Severity) -> SeverityParams {
    severity_params(kind, severity)
}

fn per_frame(
    seq: &FrameSequence,
    rng: &SeededRng,
    f: impl Fn(&Frame, SeededRng) -> Frame,
) -> FrameSequence {
    seq.map_frames(|i, frame| f(frame, rng.child(i as u64)))
}

/// Additive Gaussian noise with standard deviation `sigma` in unit intensity.
pub fn gaussian_noise_frame(frame: &Frame, sigma: f64, mut rng: SeededRng) -> Frame {
    let mut out = frame.clone();
    for v in out.pixels_mut() {
        *v = to_u8(to_unit(*v) + sigma * rng.standard_normal());
    }
    out
}

pub fn gaussian_noise(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::GaussianNoise { sigma } = params(CorruptionKind::GaussianNoise, severity) else {
        unreachable!()
    };
    per_frame(seq, rng, |f, r| gaussian_noise_frame(f, sigma, r))
}

/// Multiplicative noise: `x + x * N(0, scale^2)`.
pub fn speckle_noise_frame(frame: &Frame, scale: f64, mut rng: SeededRng) -> Frame {
    let mut out = frame.clone();
    for v in out.pixels_mut() {
        let x = to_unit(*v);
        *v = to_u8(x + x * scale * rng.standard_normal());
    }
    out
}

pub fn speckle_noise(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::SpeckleNoise { scale } = params(CorruptionKind::SpeckleNoise, severity) else {
        unreachable!()
    };
    per_frame(seq, rng, |f, r| speckle_noise_frame(f, scale, r))
}

/// Photon-count noise: `Poisson(x * photons) / photons`.
pub fn shot_noise_frame(frame: &Frame, photons: f64, mut rng: SeededRng) -> Frame {
    let mut out = frame.clone();
    for v in out.pixels_mut() {
        let x = to_unit(*v);
        *v = to_u8(rng.poisson(x * photons) / photons);
    }
    out
}

pub fn shot_noise(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::ShotNoise { photons } = params(CorruptionKind::ShotNoise, severity) else {
        unreachable!()
    };
    per_frame(seq, rng, |f, r| shot_noise_frame(f, photons, r))
}

/// Salt-and-pepper noise: exactly `round(amount * H * W)` pixels (all three
/// channels) are set to black or white with equal probability.
pub fn impulse_noise_frame(frame: &Frame, amount: f64, mut rng: SeededRng) -> Frame {
    let n = frame.height() * frame.width();
    let k = crate::frame::round_half_away(amount * n as f64) as usize;
    let mut out = frame.clone();
    for idx in rng.choose_distinct(n, k) {
        let value = if rng.next_bit() { 255 } else { 0 };
        out.pixels_mut()[idx * CHANNELS..(idx + 1) * CHANNELS].fill(value);
    }
    out
}

pub fn impulse_noise(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::ImpulseNoise { amount } = params(CorruptionKind::ImpulseNoise, severity) else {
        unreachable!()
    };
    per_frame(seq, rng, |f, r| impulse_noise_frame(f, amount, r))
}

/// Impulse noise with a caller-chosen amount, for schedules outside the
/// built-in table.
pub fn impulse_noise_with_amount(seq: &FrameSequence, amount: f64, rng: &SeededRng) -> Result<FrameSequence> {
    if !(0.0..=1.0).contains(&amount) {
        return Err(Error::InvalidConfig(alloc::format!("impulse amount {amount} outside [0, 1]")));
    }
    Ok(per_frame(seq, rng, |f, r| impulse_noise_frame(f, amount, r)))
}

/// Normalized disk kernel with a Gaussian-softened rim.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskKernel {
    radius: usize,
    alias_sigma: f64,
    half: usize,
    taps: Vec<Tap>,
}

impl DiskKernel {
    /// Taps below this weight (relative to the largest) are dropped.
    const PRUNE: f64 = 1e-12;

    pub fn new(radius: usize, alias_sigma: f64) -> Self {
        assert!(alias_sigma >= 0.0, "alias sigma must be nonnegative");
        let g_half = libm::ceil(3.0 * alias_sigma) as usize;
        let gauss: Vec<f64> = if alias_sigma == 0.0 {
            alloc::vec![1.0]
        } else {
            let raw: Vec<f64> = (-(g_half as isize)..=g_half as isize)
                .map(|k| libm::exp(-((k * k) as f64) / (2.0 * alias_sigma * alias_sigma)))
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        };
        let g_half = gauss.len() / 2;
        let half = radius + g_half;
        let side = 2 * half + 1;
        let r2 = (radius * radius) as isize;
        let mut grid = alloc::vec![0.0f64; side * side];
        // Disk convolved with the separable Gaussian.
        for dy in -(radius as isize)..=radius as isize {
            for dx in -(radius as isize)..=radius as isize {
                if dy * dy + dx * dx > r2 {
                    continue;
                }
                for (gy, wy) in gauss.iter().enumerate() {
                    for (gx, wx) in gauss.iter().enumerate() {
                        let y = (dy + gy as isize - g_half as isize + half as isize) as usize;
                        let x = (dx + gx as isize - g_half as isize + half as isize) as usize;
                        grid[y * side + x] += wy * wx;
                    }
                }
            }
        }
        let max = grid.iter().cloned().fold(0.0, f64::max);
        let mut taps: Vec<Tap> = grid
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > max * Self::PRUNE)
            .map(|(i, &w)| Tap {
                dy: (i / side) as isize - half as isize,
                dx: (i % side) as isize - half as isize,
                weight: w,
            })
            .collect();
        let total: f64 = taps.iter().map(|t| t.weight).sum();
        for t in &mut taps {
            t.weight /= total;
        }
        Self { radius, alias_sigma, half, taps }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn alias_sigma(&self) -> f64 {
        self.alias_sigma
    }

    /// Largest absolute tap offset.
    pub fn half_width(&self) -> usize {
        self.half
    }

    /// `(dy, dx, weight)` for every nonzero tap.
    pub fn taps(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        self.taps.iter().map(|t| (t.dy, t.dx, t.weight))
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().map(|t| t.weight).sum()
    }

    /// Correlates a real frame with the kernel (reflect borders), no clipping.
    pub fn apply_real(&self, frame: &RealFrame) -> RealFrame {
        correlate(frame, &self.taps)
    }
}

pub fn defocus_blur_frame(frame: &Frame, kernel: &DiskKernel) -> Frame {
    denormalize(&kernel.apply_real(&normalize(frame)))
}

pub fn defocus_blur(seq: &FrameSequence, severity: Severity) -> Result<FrameSequence> {
    let SeverityParams::DefocusBlur { radius, alias_sigma } = params(CorruptionKind::DefocusBlur, severity)
    else {
        unreachable!()
    };
    if seq.height() <= 2 * radius || seq.width() <= 2 * radius {
        return Err(Error::FrameTooSmall { height: seq.height(), width: seq.width(), radius });
    }
    let kernel = DiskKernel::new(radius, alias_sigma);
    Ok(seq.map_frames(|_, f| defocus_blur_frame(f, &kernel)))
}

/// Zoom factors `1.00, 1.01, ..., max_zoom`.
pub fn zoom_factors(max_zoom: f64) -> Vec<f64> {
    let steps = crate::frame::round_half_away((max_zoom - 1.0) / ZOOM_BLUR_STEP) as usize;
    (0..=steps).map(|i| 1.0 + i as f64 * ZOOM_BLUR_STEP).collect()
}

/// Resamples `src` magnified by `zoom` about the image center (bilinear, edge clamp).
pub(crate) fn center_zoom(src: &RealFrame, zoom: f64) -> RealFrame {
    let (h, w) = (src.height, src.width);
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = RealFrame::zeros(h, w);
    for y in 0..h {
        let sy = cy + (y as f64 - cy) / zoom;
        for x in 0..w {
            let sx = cx + (x as f64 - cx) / zoom;
            let o = (y * w + x) * CHANNELS;
            out.data[o..o + CHANNELS].copy_from_slice(&bilinear(src, sy, sx, Border::Clamp));
        }
    }
    out
}

pub fn zoom_blur_frame(frame: &Frame, max_zoom: f64) -> Frame {
    let src = normalize(frame);
    let factors = zoom_factors(max_zoom);
    let mut acc = RealFrame::zeros(src.height, src.width);
    for &z in &factors {
        let zoomed = if z == 1.0 { src.clone() } else { center_zoom(&src, z) };
        for (a, v) in acc.data.iter_mut().zip(&zoomed.data) {
            *a += v;
        }
    }
    let n = factors.len() as f64;
    for a in &mut acc.data {
        *a /= n;
    }
    denormalize(&acc)
}

pub fn zoom_blur(seq: &FrameSequence, severity: Severity) -> FrameSequence {
    let SeverityParams::ZoomBlur { max_zoom } = params(CorruptionKind::ZoomBlur, severity) else {
        unreachable!()
    };
    seq.map_frames(|_, f| zoom_blur_frame(f, max_zoom))
}

/// Trailing line kernel: taps `0..=radius` along the direction, Gaussian
/// weights with std `sigma`, normalized.
fn motion_taps(radius: usize, sigma: f64, angle_deg: f64) -> Vec<(f64, f64, f64)> {
    let theta = angle_deg.to_radians();
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let raw: Vec<(f64, f64, f64)> = (0..=radius)
        .map(|i| {
            let d = i as f64;
            let w = libm::exp(-(d * d) / (2.0 * sigma * sigma));
            (d * s, d * c, w)
        })
        .collect();
    let total: f64 = raw.iter().map(|t| t.2).sum();
    raw.into_iter().map(|(dy, dx, w)| (dy, dx, w / total)).collect()
}

pub fn motion_blur_frame(frame: &Frame, radius: usize, sigma: f64, angle_deg: f64) -> Frame {
    let src = normalize(frame);
    let taps = motion_taps(radius, sigma, angle_deg);
    let (h, w) = (src.height, src.width);
    let mut out = RealFrame::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; CHANNELS];
            for &(dy, dx, wt) in &taps {
                let px = bilinear(&src, y as f64 - dy, x as f64 - dx, Border::Reflect);
                for c in 0..CHANNELS {
                    acc[c] += wt * px[c];
                }
            }
            let o = (y * w + x) * CHANNELS;
            out.data[o..o + CHANNELS].copy_from_slice(&acc);
        }
    }
    denormalize(&out)
}

/// Blur angle in degrees, `[0, 180)`, shared by every frame of the sequence.
pub fn motion_blur_angle(rng: &SeededRng) -> f64 {
    rng.sequence_stream().uniform_range(0.0, 180.0)
}

pub fn motion_blur(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    motion_blur_with_angle(seq, severity, motion_blur_angle(rng))
}

pub fn motion_blur_with_angle(seq: &FrameSequence, severity: Severity, angle_deg: f64) -> FrameSequence {
    let SeverityParams::MotionBlur { radius, sigma } = params(CorruptionKind::MotionBlur, severity) else {
        unreachable!()
    };
    seq.map_frames(|_, f| motion_blur_frame(f, radius, sigma, angle_deg))
}

/// Zoom factor for frame `t` of `len`: ramps linearly from 1 to `max_zoom`.
pub fn zoom_in_factor(t: usize, len: usize, max_zoom: f64) -> f64 {
    if len < 2 {
        return max_zoom;
    }
    1.0 + (max_zoom - 1.0) * t as f64 / (len - 1) as f64
}

pub fn zoom_in_frame(frame: &Frame, zoom: f64) -> Frame {
    if zoom == 1.0 {
        return frame.clone();
    }
    denormalize(&center_zoom(&normalize(frame), zoom))
}

pub fn zoom_in(seq: &FrameSequence, severity: Severity) -> FrameSequence {
    let SeverityParams::ZoomIn { max_zoom } = params(CorruptionKind::ZoomIn, severity) else {
        unreachable!()
    };
    let len = seq.len();
    seq.map_frames(|t, f| zoom_in_frame(f, zoom_in_factor(t, len, max_zoom)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sev(l: u8) -> Severity {
        Severity::new(l).unwrap()
    }

    fn constant_seq(h: usize, w: usize, v: u8, t: usize) -> FrameSequence {
        FrameSequence::new(vec![Frame::filled(h, w, v); t], "c").unwrap()
    }

    fn diffs_unit(a: &Frame, b: &Frame) -> Vec<f64> {
        a.pixels()
            .iter()
            .zip(b.pixels())
            .map(|(&x, &y)| (f64::from(y) - f64::from(x)) / 255.0)
            .collect()
    }

    fn mean_std(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        (m, libm::sqrt(var))
    }

    #[test]
    fn gaussian_std_matches_sigma() {
        let seq = constant_seq(64, 64, 128, 1);
        let out = gaussian_noise(&seq, sev(1), &SeededRng::new(3));
        let (_, sd) = mean_std(&diffs_unit(&seq.frames()[0], &out.frames()[0]));
        assert!((0.072..=0.088).contains(&sd), "std {sd}");
        assert_eq!(out.height(), 64);
        assert_eq!(out.width(), 64);
    }

    #[test]
    fn speckle_black_is_fixed_point_and_std_scales() {
        let black = constant_seq(16, 16, 0, 2);
        assert_eq!(speckle_noise(&black, sev(5), &SeededRng::new(1)), black);
        let mid = constant_seq(64, 64, 128, 1);
        let out = speckle_noise(&mid, sev(1), &SeededRng::new(2));
        let (_, sd) = mean_std(&diffs_unit(&mid.frames()[0], &out.frames()[0]));
        let expected = (128.0 / 255.0) * 0.15;
        assert!((sd - expected).abs() <= 0.1 * expected, "std {sd} vs {expected}");
    }

    #[test]
    fn shot_noise_black_and_mean() {
        let black = constant_seq(16, 16, 0, 2);
        assert_eq!(shot_noise(&black, sev(5), &SeededRng::new(1)), black);
        let mid = constant_seq(64, 64, 128, 1);
        let out = shot_noise(&mid, sev(1), &SeededRng::new(4));
        let m = out.frames()[0].pixels().iter().map(|&v| f64::from(v)).sum::<f64>()
            / out.frames()[0].pixels().len() as f64
            / 255.0;
        assert!((0.48..=0.52).contains(&m), "mean {m}");
    }

    #[test]
    fn impulse_fraction_and_untouched_pixels() {
        let seq = constant_seq(64, 64, 128, 1);
        let out = impulse_noise(&seq, sev(1), &SeededRng::new(5));
        let (a, b) = (&seq.frames()[0], &out.frames()[0]);
        let mut changed = 0;
        for y in 0..64 {
            for x in 0..64 {
                let p = b.pixel(y, x);
                if p != a.pixel(y, x) {
                    changed += 1;
                    assert!(p == [0; 3] || p == [255; 3]);
                }
            }
        }
        let frac = changed as f64 / 4096.0;
        assert!((0.024..=0.036).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn impulse_amount_override_validated() {
        let seq = constant_seq(8, 8, 1, 1);
        assert!(impulse_noise_with_amount(&seq, 1.5, &SeededRng::new(0)).is_err());
        let out = impulse_noise_with_amount(&seq, 0.0, &SeededRng::new(0)).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn disk_kernel_invariants() {
        for s in Severity::ALL {
            let SeverityParams::DefocusBlur { radius, alias_sigma } =
                severity_params(CorruptionKind::DefocusBlur, s)
            else {
                unreachable!()
            };
            let k = DiskKernel::new(radius, alias_sigma);
            assert!((k.sum() - 1.0).abs() < 1e-9);
            assert!(k.taps().all(|(_, _, w)| w >= 0.0));
            let reach = radius as f64 + libm::ceil(3.0 * alias_sigma) * core::f64::consts::SQRT_2;
            assert!(k.taps().all(|(dy, dx, _)| ((dy * dy + dx * dx) as f64) <= reach * reach));
        }
        // The mildest softening leaves the support inside the disk itself.
        let k = DiskKernel::new(3, 0.1);
        assert!(k.taps().all(|(dy, dx, _)| dy * dy + dx * dx <= 9));
        assert_eq!(k.taps().count(), 29);
    }

    #[test]
    fn defocus_constant_and_small_frame() {
        let seq = constant_seq(32, 32, 77, 2);
        assert_eq!(defocus_blur(&seq, sev(3)).unwrap(), seq);
        let tiny = constant_seq(12, 40, 0, 1);
        assert!(matches!(defocus_blur(&tiny, sev(3)), Err(Error::FrameTooSmall { radius: 6, .. })));
    }

    #[test]
    fn defocus_impulse_response() {
        let mut real = RealFrame::zeros(21, 21);
        let c = (10 * 21 + 10) * CHANNELS;
        real.data[c..c + 3].fill(1.0);
        let k = DiskKernel::new(3, 0.1);
        let out = k.apply_real(&real);
        let mass: f64 = out.data.iter().step_by(3).sum();
        assert!((mass - 1.0).abs() < 0.01);
        for y in 0..21isize {
            for x in 0..21isize {
                let v = out.data[((y * 21 + x) as usize) * 3];
                if (y - 10).pow(2) + (x - 10).pow(2) > 9 {
                    assert!(v == 0.0, "leak at {y},{x}");
                }
            }
        }
        // Through 8-bit quantization the mass only drifts by rounding.
        let mut f = Frame::filled(21, 21, 0);
        f.set_pixel(10, 10, [255; 3]);
        let seq = FrameSequence::new(vec![f], "p").unwrap();
        let out = defocus_blur_frame(&seq.frames()[0], &k);
        let total: u32 = out.pixels().iter().step_by(3).map(|&v| u32::from(v)).sum();
        assert!((i64::from(total) - 255).abs() <= 29 / 2 + 1);
    }

    #[test]
    fn zoom_factor_ranges() {
        let f = zoom_factors(1.16);
        assert_eq!(f.len(), 17);
        assert_eq!(f[0], 1.0);
        assert!((f[16] - 1.16).abs() < 1e-12);
    }

    #[test]
    fn zoom_blur_constant_and_radial() {
        let seq = constant_seq(24, 24, 200, 1);
        assert_eq!(zoom_blur(&seq, sev(5)), seq);
        let frame = Frame::from_fn(64, 64, |y, x| {
            if (16..48).contains(&y) && (16..48).contains(&x) {
                [255; 3]
            } else {
                [0; 3]
            }
        });
        let out = zoom_blur_frame(&frame, 1.31);
        // Pixels near the center barely move; the square bleeds outward.
        let err = |y: usize, x: usize| (i32::from(out.pixel(y, x)[0]) - i32::from(frame.pixel(y, x)[0])).abs();
        assert_eq!(err(31, 31), 0);
        assert!(err(14, 31) > 0 && err(49, 31) > 0);
    }

    #[test]
    fn motion_blur_horizontal_impulse() {
        let mut f = Frame::filled(32, 48, 0);
        f.set_pixel(16, 24, [255; 3]);
        let seq = FrameSequence::new(vec![f], "p").unwrap();
        let out = motion_blur_with_angle(&seq, sev(1), 0.0);
        let fr = &out.frames()[0];
        let mut xs = Vec::new();
        for y in 0..32 {
            for x in 0..48 {
                if fr.pixel(y, x) != [0; 3] {
                    assert_eq!(y, 16);
                    xs.push(x);
                }
            }
        }
        let span = xs.iter().max().unwrap() - xs.iter().min().unwrap() + 1;
        assert!(span <= 2 * 10 + 1);
    }

    #[test]
    fn motion_blur_constant_and_shared_angle() {
        let seq = constant_seq(20, 20, 90, 3);
        assert_eq!(motion_blur(&seq, sev(5), &SeededRng::new(11)), seq);
        let a = motion_blur_angle(&SeededRng::new(11));
        assert!((0.0..180.0).contains(&a));
    }

    #[test]
    fn zoom_in_first_frame_identity_and_square_growth() {
        let square = Frame::from_fn(64, 64, |y, x| {
            if (27..37).contains(&y) && (27..37).contains(&x) {
                [255; 3]
            } else {
                [0; 3]
            }
        });
        let frames = vec![square.clone(); 5];
        let seq = FrameSequence::new(frames, "sq").unwrap();
        let out = zoom_in(&seq, sev(3));
        assert_eq!(out.frames()[0], square);
        let last = &out.frames()[4];
        let side = (0..64).filter(|&x| last.pixel(31, x)[0] >= 128).count();
        assert!((23..=27).contains(&side), "side {side}");
    }

    #[test]
    fn zoom_in_single_frame_uses_max() {
        assert_eq!(zoom_in_factor(0, 1, 2.5), 2.5);
        assert_eq!(zoom_in_factor(0, 4, 2.5), 1.0);
        assert_eq!(zoom_in_factor(3, 4, 2.5), 2.5);
    }

    #[test]
    fn frame_order_does_not_matter() {
        let seq = FrameSequence::new(
            (0..6).map(|i| Frame::from_fn(16, 16, |y, x| [(y * 9 + x + i) as u8; 3])).collect(),
            "o",
        )
        .unwrap();
        let rng = SeededRng::new(99);
        let forward = gaussian_noise(&seq, sev(2), &rng);
        let mut backward: Vec<(usize, Frame)> = (0..seq.len())
            .rev()
            .map(|i| (i, gaussian_noise_frame(&seq.frames()[i], 0.12, rng.child(i as u64))))
            .collect();
        backward.sort_by_key(|(i, _)| *i);
        let backward: Vec<Frame> = backward.into_iter().map(|(_, f)| f).collect();
        assert_eq!(forward.frames(), &backward[..]);
    }
}
