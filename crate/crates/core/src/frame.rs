//! Frames, sequences and the `[0, 255] <-> [0, 1]` pixel mapping.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Number of interleaved channels per pixel.
pub const CHANNELS: usize = 3;

/// One RGB frame, interleaved, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidFrame(format!("zero-sized frame {height}x{width}")));
        }
        if pixels.len() != height * width * CHANNELS {
            return Err(Error::InvalidFrame(format!(
                "expected {} bytes for {height}x{width}x3, got {}",
                height * width * CHANNELS,
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    /// A frame where every channel of every pixel equals `value`.
    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        assert!(height > 0 && width > 0, "zero-sized frame");
        Self { height, width, pixels: vec![value; height * width * CHANNELS] }
    }

    /// Builds a frame by evaluating `f(y, x)` for each pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(height > 0 && width > 0, "zero-sized frame");
        let mut pixels = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(y, x));
            }
        }
        Self { height, width, pixels }
    }

    /// Expands a single-channel buffer to RGB.
    pub fn from_gray(height: usize, width: usize, gray: &[u8]) -> Result<Self> {
        if gray.len() != height * width {
            return Err(Error::InvalidFrame(format!(
                "expected {} gray bytes, got {}",
                height * width,
                gray.len()
            )));
        }
        let pixels = gray.iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.pixels[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Real-valued frame, nominally in `[0, 1]` but unclipped until [`denormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealFrame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl RealFrame {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width * CHANNELS] }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }
}

/// An ordered run of equally sized frames.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    source_id: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, source_id: impl Into<String>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptySequence)?;
        if let Some((i, bad)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
            return Err(Error::DimMismatch {
                expected: format!("{}x{}", first.height, first.width),
                found: format!("{}x{} at frame {i}", bad.height, bad.width),
            });
        }
        Ok(Self { frames, source_id: source_id.into() })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false for a constructed sequence; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Replaces the frames, keeping the source id. Shapes are checked.
    pub(crate) fn with_frames(&self, frames: Vec<Frame>) -> Self {
        Self::new(frames, self.source_id.clone()).expect("kernels preserve frame shape")
    }

    pub(crate) fn map_frames(&self, mut f: impl FnMut(usize, &Frame) -> Frame) -> Self {
        let frames = self.frames.iter().enumerate().map(|(i, fr)| f(i, fr)).collect();
        self.with_frames(frames)
    }
}

/// Rounds to the nearest integer, halves away from zero.
#[inline]
pub fn round_half_away(v: f64) -> f64 {
    libm::round(v)
}

/// Maps a real intensity to 8 bits: clip to `[0, 1]`, scale by 255, round
/// half away from zero. NaN maps to 0.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    let clipped = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    round_half_away(clipped * 255.0) as u8
}

#[inline]
pub fn to_unit(v: u8) -> f64 {
    f64::from(v) / 255.0
}

pub fn normalize(frame: &Frame) -> RealFrame {
    RealFrame {
        height: frame.height,
        width: frame.width,
        data: frame.pixels.iter().map(|&v| to_unit(v)).collect(),
    }
}

pub fn denormalize(real: &RealFrame) -> Frame {
    Frame {
        height: real.height,
        width: real.width,
        pixels: real.data.iter().map(|&v| to_u8(v)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_every_byte() {
        for v in 0..=255u8 {
            assert_eq!(to_u8(to_unit(v)), v);
        }
    }

    #[test]
    fn clipping_and_rounding() {
        assert_eq!(to_u8(1.7), 255);
        assert_eq!(to_u8(-0.3), 0);
        // 0.5 * 255 = 127.5 rounds away from zero.
        assert_eq!(to_u8(0.5), 128);
        assert_eq!(to_u8(f64::NAN), 0);
    }

    #[test]
    fn sequence_rejects_mixed_shapes() {
        let a = Frame::filled(4, 4, 0);
        let b = Frame::filled(4, 5, 0);
        assert!(matches!(
            FrameSequence::new(alloc::vec![a, b], "s"),
            Err(Error::DimMismatch { .. })
        ));
        assert_eq!(FrameSequence::new(Vec::new(), "s"), Err(Error::EmptySequence));
    }

    #[test]
    fn gray_expands_to_rgb() {
        let f = Frame::from_gray(1, 2, &[7, 9]).unwrap();
        assert_eq!(f.pixels(), &[7, 7, 7, 9, 9, 9]);
    }
}
