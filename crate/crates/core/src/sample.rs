//! Border handling, bilinear sampling and sparse correlation over real frames.

use crate::frame::{RealFrame, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Border {
    /// Mirror without repeating the edge sample (`dcb|abcd|cba`).
    Reflect,
    Clamp,
}

#[inline]
pub(crate) fn map_index(i: isize, n: usize, border: Border) -> usize {
    let n_i = n as isize;
    if (0..n_i).contains(&i) {
        return i as usize;
    }
    match border {
        Border::Clamp => i.clamp(0, n_i - 1) as usize,
        Border::Reflect => {
            if n == 1 {
                return 0;
            }
            let period = 2 * (n_i - 1);
            let m = i.rem_euclid(period);
            (if m >= n_i { period - m } else { m }) as usize
        }
    }
}

/// Bilinear sample of all channels at real coordinates `(fy, fx)`.
#[inline]
pub(crate) fn bilinear(src: &RealFrame, fy: f64, fx: f64, border: Border) -> [f64; CHANNELS] {
    let y0 = libm::floor(fy);
    let x0 = libm::floor(fx);
    let ty = fy - y0;
    let tx = fx - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let ya = map_index(y0, src.height, border);
    let yb = map_index(y0 + 1, src.height, border);
    let xa = map_index(x0, src.width, border);
    let xb = map_index(x0 + 1, src.width, border);
    let mut out = [0.0; CHANNELS];
    for (c, o) in out.iter_mut().enumerate() {
        let top = if tx == 0.0 {
            src.at(ya, xa, c)
        } else {
            src.at(ya, xa, c) * (1.0 - tx) + src.at(ya, xb, c) * tx
        };
        *o = if ty == 0.0 {
            top
        } else {
            let bottom = if tx == 0.0 {
                src.at(yb, xa, c)
            } else {
                src.at(yb, xa, c) * (1.0 - tx) + src.at(yb, xb, c) * tx
            };
            top * (1.0 - ty) + bottom * ty
        };
    }
    out
}

/// One kernel tap: output(y, x) += weight * input(y + dy, x + dx).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tap {
    pub dy: isize,
    pub dx: isize,
    pub weight: f64,
}

/// Correlates every channel with a sparse kernel, reflecting at the borders.
pub(crate) fn correlate(src: &RealFrame, taps: &[Tap]) -> RealFrame {
    let (h, w) = (src.height, src.width);
    let mut out = RealFrame::zeros(h, w);
    let max_off = taps.iter().map(|t| t.dy.abs().max(t.dx.abs())).max().unwrap_or(0);
    for y in 0..h {
        let interior_y = y as isize >= max_off && (y as isize) + max_off < h as isize;
        for x in 0..w {
            let interior = interior_y && x as isize >= max_off && (x as isize) + max_off < w as isize;
            let mut acc = [0.0; CHANNELS];
            for t in taps {
                let (sy, sx) = if interior {
                    ((y as isize + t.dy) as usize, (x as isize + t.dx) as usize)
                } else {
                    (
                        map_index(y as isize + t.dy, h, Border::Reflect),
                        map_index(x as isize + t.dx, w, Border::Reflect),
                    )
                };
                let base = (sy * w + sx) * CHANNELS;
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += t.weight * src.data[base + c];
                }
            }
            let o = (y * w + x) * CHANNELS;
            out.data[o..o + CHANNELS].copy_from_slice(&acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        let r = |i| map_index(i, 4, Border::Reflect);
        assert_eq!([r(-3), r(-2), r(-1), r(0), r(3), r(4), r(5), r(6)], [3, 2, 1, 0, 3, 2, 1, 0]);
        assert_eq!(map_index(-5, 1, Border::Reflect), 0);
        assert_eq!(map_index(9, 4, Border::Clamp), 3);
        assert_eq!(map_index(-9, 4, Border::Clamp), 0);
    }

    #[test]
    fn bilinear_midpoint() {
        let mut f = RealFrame::zeros(1, 2);
        f.data[3..6].copy_from_slice(&[1.0, 1.0, 1.0]);
        assert_eq!(bilinear(&f, 0.0, 0.5, Border::Clamp), [0.5; 3]);
        assert_eq!(bilinear(&f, 0.0, 1.0, Border::Clamp), [1.0; 3]);
    }
}
