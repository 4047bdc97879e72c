//! Visibility corruptions: vignette low light, fog, rain and snow.
//!
//! Constants that only fix the rendering style (vignette slope, fog
//! transparency, streak slant, whitening strength) are public so they can be
//! recorded next to the outputs they shaped.

use alloc::vec::Vec;

use crate::frame::{denormalize, normalize, to_u8, to_unit, Frame, FrameSequence, RealFrame, CHANNELS};
use crate::occlusion::BinaryMask;
use crate::rng::SeededRng;
use crate::sample::{bilinear, Border};
use crate::severity::{severity_params, CorruptionKind, RainType, Severity, SeverityParams};

/// Mask darkening per unit of vignette strength at the corners.
pub const VIGNETTE_SLOPE: f64 = 0.18;
/// Fog layer transparency is `FOG_ALPHA_SLOPE * density + FOG_ALPHA_BASE`.
pub const FOG_ALPHA_SLOPE: f64 = 0.08;
pub const FOG_ALPHA_BASE: f64 = 0.1;
/// Haze patches may vary the fog weight by at most this fraction of its mean.
pub const FOG_HAZE_GAIN: f64 = 1.0;
/// Haze patches are bilinear interpolants of a coarse grid this many cells wide.
pub const FOG_HAZE_GRID: usize = 4;
/// Rain streak slant range in degrees from vertical.
pub const RAIN_SLANT_DEG: f64 = 10.0;
/// Rain streak intensity.
pub const RAIN_DROP_VALUE: f64 = 200.0 / 255.0;
/// Fraction of the remaining headroom added to bright pixels by snow.
pub const SNOW_WHITEN: f64 = 0.5;

/// Vignette multiplier at `(y, x)` for strength `s`.
pub fn vignette(height: usize, width: usize, y: usize, x: usize, strength: f64) -> f64 {
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let r_max = libm::sqrt(cy * cy + cx * cx);
    if r_max == 0.0 {
        return 1.0;
    }
    let (dy, dx) = (y as f64 - cy, x as f64 - cx);
    let r = libm::sqrt(dy * dy + dx * dx);
    (1.0 - strength * VIGNETTE_SLOPE * r / r_max).clamp(0.0, 1.0)
}

pub fn low_light_frame(frame: &Frame, strength: f64) -> Frame {
    let (h, w) = (frame.height(), frame.width());
    let mut out = frame.clone();
    for y in 0..h {
        for x in 0..w {
            let m = vignette(h, w, y, x, strength);
            let i = (y * w + x) * CHANNELS;
            for v in &mut out.pixels_mut()[i..i + CHANNELS] {
                *v = to_u8(to_unit(*v) * m);
            }
        }
    }
    out
}

pub fn low_light(seq: &FrameSequence, severity: Severity) -> FrameSequence {
    let SeverityParams::LowLight { strength } = severity_params(CorruptionKind::LowLight, severity) else {
        unreachable!()
    };
    seq.map_frames(|_, f| low_light_frame(f, f64::from(strength)))
}

/// Mean blend weight toward white for fog density `d`: `(0.08 d + 0.1) d`.
pub fn fog_weight(density: f64) -> f64 {
    (FOG_ALPHA_SLOPE * density + FOG_ALPHA_BASE) * density
}

/// Low-frequency field in `[-1, 1]`: bilinear upsampling of a coarse random grid.
pub fn haze_field(height: usize, width: usize, rng: &mut SeededRng) -> Vec<f64> {
    let g = FOG_HAZE_GRID + 1;
    let mut coarse = RealFrame::zeros(g, g);
    for v in coarse.data.chunks_mut(CHANNELS) {
        v.fill(rng.uniform_range(-1.0, 1.0));
    }
    let sy = if height > 1 { (g - 1) as f64 / (height - 1) as f64 } else { 0.0 };
    let sx = if width > 1 { (g - 1) as f64 / (width - 1) as f64 } else { 0.0 };
    let mut field = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            field.push(bilinear(&coarse, y as f64 * sy, x as f64 * sx, Border::Clamp)[0]);
        }
    }
    field
}

/// `N * Var` in exact integer arithmetic over all channel values.
fn scaled_variance(pixels: &[u8]) -> u128 {
    let n = pixels.len() as u128;
    let (s, s2) = pixels
        .iter()
        .fold((0u128, 0u128), |(s, s2), &v| (s + u128::from(v), s2 + u128::from(v) * u128::from(v)));
    n * s2 - s * s
}

fn unit_std(pixels: &[u8]) -> f64 {
    let n = pixels.len() as f64;
    libm::sqrt(scaled_variance(pixels) as f64) / n / 255.0
}

fn fog_render(frame: &Frame, weight: f64, haze: &[f64], amplitude: f64) -> Frame {
    let mut out = frame.clone();
    for (p, px) in out.pixels_mut().chunks_mut(CHANNELS).enumerate() {
        let w = (weight + amplitude * haze[p]).clamp(0.0, 1.0);
        for v in px {
            let x = to_unit(*v);
            *v = to_u8(x + w * (1.0 - x));
        }
    }
    out
}

/// Blends toward white with mean weight [`fog_weight`] plus haze patches.
///
/// The patch amplitude is bounded by the frame's own contrast so the output
/// intensity variance never exceeds the input's; if quantization would still
/// break that bound the amplitude is halved until it holds.
pub fn fog_frame(frame: &Frame, density: f64, haze: &[f64]) -> Frame {
    let weight = fog_weight(density);
    let mut amplitude = (FOG_HAZE_GAIN * weight).min(weight * unit_std(frame.pixels()));
    let budget = scaled_variance(frame.pixels());
    for _ in 0..8 {
        let out = fog_render(frame, weight, haze, amplitude);
        if scaled_variance(out.pixels()) <= budget {
            return out;
        }
        amplitude /= 2.0;
    }
    fog_render(frame, weight, haze, 0.0)
}

pub fn fog(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::Fog { coefficient } = severity_params(CorruptionKind::Fog, severity) else {
        unreachable!()
    };
    let haze = haze_field(seq.height(), seq.width(), &mut rng.sequence_stream());
    seq.map_frames(|_, f| fog_frame(f, coefficient, &haze))
}

/// Number of streaks for a frame of the given area.
pub fn rain_drop_count(height: usize, width: usize, rain_type: RainType) -> usize {
    (height * width / rain_type.area_per_drop()).max(1)
}

/// Renders one rainy frame and returns it with the streak mask.
pub fn rain_frame(
    frame: &Frame,
    rain_type: RainType,
    brightness: f64,
    drop_length: usize,
    mut rng: SeededRng,
) -> (Frame, BinaryMask) {
    let (h, w) = (frame.height(), frame.width());
    let slant = rng.uniform_range(-RAIN_SLANT_DEG, RAIN_SLANT_DEG).to_radians();
    let (dy, dx) = (libm::cos(slant), libm::sin(slant));
    let mut mask = BinaryMask::empty(h, w);
    for _ in 0..rain_drop_count(h, w, rain_type) {
        let y0 = rng.uniform_range(0.0, h as f64);
        let x0 = rng.uniform_range(0.0, w as f64);
        for j in 0..drop_length {
            let y = libm::floor(y0 + j as f64 * dy);
            let x = libm::floor(x0 + j as f64 * dx);
            if y >= 0.0 && x >= 0.0 && (y as usize) < h && (x as usize) < w {
                mask.set(y as usize, x as usize, true);
            }
        }
    }
    let mut composite = normalize(frame);
    for (p, px) in composite.data.chunks_mut(CHANNELS).enumerate() {
        if mask.get(p / w, p % w) {
            px.fill(RAIN_DROP_VALUE);
        }
    }
    // 3-tap average along the streak direction, streak pixels only.
    let mut blurred = composite.clone();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) {
                continue;
            }
            let (fy, fx) = (y as f64, x as f64);
            let a = bilinear(&composite, fy - dy, fx - dx, Border::Clamp);
            let b = bilinear(&composite, fy + dy, fx + dx, Border::Clamp);
            let o = (y * w + x) * CHANNELS;
            for c in 0..CHANNELS {
                blurred.data[o + c] = (a[c] + composite.data[o + c] + b[c]) / 3.0;
            }
        }
    }
    for v in &mut blurred.data {
        *v *= brightness;
    }
    (denormalize(&blurred), mask)
}

pub fn rain(seq: &FrameSequence, severity: Severity, rng: &SeededRng) -> FrameSequence {
    let SeverityParams::Rain { rain_type, brightness, drop_length } =
        severity_params(CorruptionKind::Rain, severity)
    else {
        unreachable!()
    };
    seq.map_frames(|i, f| rain_frame(f, rain_type, brightness, drop_length, rng.child(i as u64)).0)
}

/// Per-pixel lightness `(max + min)` in doubled 8-bit units.
fn lightness2(px: &[u8]) -> u16 {
    let max = px.iter().copied().max().unwrap_or(0);
    let min = px.iter().copied().min().unwrap_or(0);
    u16::from(max) + u16::from(min)
}

/// Whitens the brightest `floor(coefficient * N)` pixels (strictly above the
/// lightness quantile, so ties never push the count over) and scales the
/// whole frame by `1 + coefficient`.
pub fn snow_frame(frame: &Frame, coefficient: f64) -> Frame {
    let light: Vec<u16> = frame.pixels().chunks(CHANNELS).map(lightness2).collect();
    let n = light.len();
    let budget = libm::floor(coefficient * n as f64) as usize;
    let threshold = if budget == 0 {
        u16::MAX
    } else {
        let mut sorted = light.clone();
        sorted.sort_unstable();
        sorted[n - budget - 1]
    };
    let gain = 1.0 + coefficient;
    let mut out = frame.clone();
    for (px, &l) in out.pixels_mut().chunks_mut(CHANNELS).zip(&light) {
        let whiten = l > threshold;
        for v in px {
            let mut x = to_unit(*v);
            if whiten {
                x += (1.0 - x) * SNOW_WHITEN;
            }
            *v = to_u8(x * gain);
        }
    }
    out
}

pub fn snow(seq: &FrameSequence, severity: Severity) -> FrameSequence {
    let SeverityParams::Snow { coefficient } = severity_params(CorruptionKind::Snow, severity) else {
        unreachable!()
    };
    seq.map_frames(|_, f| snow_frame(f, coefficient))
}
