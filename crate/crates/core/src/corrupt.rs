//! Single entry point from a [`CorruptionSpec`] to a corrupted sequence.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use crate::digital::{self, ZOOM_BLUR_STEP};
use crate::environmental::{self as env, fog_weight};
use crate::error::{Error, Result};
use crate::frame::FrameSequence;
use crate::occlusion::{self, BinaryMask, MaskPack, Placement, FLAT_FILL, TARGET_AREA_FRACTION};
use crate::rng::SeededRng;
use crate::severity::{severity_params, CorruptionKind, CorruptionSpec, SeverityParams};
use crate::temporal;

/// Output of [`apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub sequence: FrameSequence,
    pub params: SeverityParams,
    /// Every numeric value that shaped the output, including fixed rendering
    /// constants and values drawn from the seed.
    pub resolved: BTreeMap<String, f64>,
    /// Frame-sized mask of occluded pixels, for occlusion only.
    pub occluder: Option<BinaryMask>,
    pub placement: Option<Placement>,
}

fn put(map: &mut BTreeMap<String, f64>, key: &str, v: f64) {
    map.insert(key.to_string(), v);
}

/// Applies `spec` to `seq`. Occlusion needs `pack`; other kinds ignore it.
pub fn apply(seq: &FrameSequence, spec: &CorruptionSpec, pack: Option<&MaskPack>) -> Result<Corrupted> {
    spec.validate()?;
    let rng = SeededRng::new(spec.seed);
    let severity = spec.severity;
    let params = severity_params(spec.kind, severity);
    let mut resolved = BTreeMap::new();
    let mut occluder = None;
    let mut placement = None;
    let sequence = match params {
        SeverityParams::GaussianNoise { sigma } => {
            put(&mut resolved, "sigma", sigma);
            digital::gaussian_noise(seq, severity, &rng)
        }
        SeverityParams::SpeckleNoise { scale } => {
            put(&mut resolved, "scale", scale);
            digital::speckle_noise(seq, severity, &rng)
        }
        SeverityParams::ShotNoise { photons } => {
            put(&mut resolved, "photons", photons);
            digital::shot_noise(seq, severity, &rng)
        }
        SeverityParams::ImpulseNoise { amount } => {
            put(&mut resolved, "amount", amount);
            digital::impulse_noise(seq, severity, &rng)
        }
        SeverityParams::DefocusBlur { radius, alias_sigma } => {
            put(&mut resolved, "radius", radius as f64);
            put(&mut resolved, "alias_sigma", alias_sigma);
            digital::defocus_blur(seq, severity)?
        }
        SeverityParams::ZoomBlur { max_zoom } => {
            put(&mut resolved, "max_zoom", max_zoom);
            put(&mut resolved, "zoom_step", ZOOM_BLUR_STEP);
            digital::zoom_blur(seq, severity)
        }
        SeverityParams::MotionBlur { radius, sigma } => {
            let angle = digital::motion_blur_angle(&rng);
            put(&mut resolved, "radius", radius as f64);
            put(&mut resolved, "sigma", sigma);
            put(&mut resolved, "angle_deg", angle);
            digital::motion_blur_with_angle(seq, severity, angle)
        }
        SeverityParams::ZoomIn { max_zoom } => {
            put(&mut resolved, "max_zoom", max_zoom);
            digital::zoom_in(seq, severity)
        }
        SeverityParams::Freeze { fraction } => {
            put(&mut resolved, "fraction", fraction);
            put(&mut resolved, "replaced", temporal::freeze_indices(seq.len(), fraction, &rng).len() as f64);
            temporal::freeze(seq, severity, &rng)
        }
        SeverityParams::Sampling { rate } => {
            put(&mut resolved, "rate", rate as f64);
            temporal::sampling(seq, severity)
        }
        SeverityParams::LowLight { strength } => {
            put(&mut resolved, "strength", f64::from(strength));
            put(&mut resolved, "vignette_slope", env::VIGNETTE_SLOPE);
            env::low_light(seq, severity)
        }
        SeverityParams::Fog { coefficient } => {
            put(&mut resolved, "coefficient", coefficient);
            put(&mut resolved, "alpha", env::FOG_ALPHA_SLOPE * coefficient + env::FOG_ALPHA_BASE);
            put(&mut resolved, "weight", fog_weight(coefficient));
            put(&mut resolved, "haze_gain", env::FOG_HAZE_GAIN);
            put(&mut resolved, "haze_grid", env::FOG_HAZE_GRID as f64);
            env::fog(seq, severity, &rng)
        }
        SeverityParams::Rain { rain_type, brightness, drop_length } => {
            put(&mut resolved, "brightness", brightness);
            put(&mut resolved, "drop_length", drop_length as f64);
            put(&mut resolved, "area_per_drop", rain_type.area_per_drop() as f64);
            put(&mut resolved, "drops_per_frame", env::rain_drop_count(seq.height(), seq.width(), rain_type) as f64);
            put(&mut resolved, "slant_deg", env::RAIN_SLANT_DEG);
            put(&mut resolved, "drop_value", env::RAIN_DROP_VALUE);
            env::rain(seq, severity, &rng)
        }
        SeverityParams::Snow { coefficient } => {
            put(&mut resolved, "coefficient", coefficient);
            put(&mut resolved, "whiten", env::SNOW_WHITEN);
            env::snow(seq, severity)
        }
        SeverityParams::Occlusion { quintile } => {
            let pack = pack.ok_or(Error::MissingMaskPack)?;
            put(&mut resolved, "quintile", f64::from(quintile));
            put(&mut resolved, "target_area_fraction", TARGET_AREA_FRACTION[severity.index()]);
            put(&mut resolved, "flat_fill", f64::from(FLAT_FILL[0]));
            let (out, mask, place) = occlusion::occlude_with_placement(seq, pack, severity, &rng)?;
            put(&mut resolved, "occluded_pixels", mask.count() as f64);
            put(&mut resolved, "top", place.top as f64);
            put(&mut resolved, "left", place.left as f64);
            occluder = Some(mask);
            placement = Some(place);
            out
        }
    };
    Ok(Corrupted { sequence, params, resolved, occluder, placement })
}

/// Convenience for kinds that never need a mask pack.
pub fn apply_kind(
    seq: &FrameSequence,
    kind: CorruptionKind,
    severity: crate::Severity,
    seed: u64,
) -> Result<FrameSequence> {
    apply(seq, &CorruptionSpec::new(kind, severity, seed), None).map(|c| c.sequence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use crate::Severity;
    use alloc::vec::Vec;

    fn seq() -> FrameSequence {
        let frames: Vec<Frame> =
            (0..6).map(|t| Frame::from_fn(32, 32, |y, x| [(x * 7 + t) as u8, (y * 7) as u8, ((x + y) * 3) as u8])).collect();
        FrameSequence::new(frames, "d").unwrap()
    }

    #[test]
    fn every_kind_dispatches() {
        let pack = MaskPack::synthetic(10);
        let s = seq();
        for kind in CorruptionKind::ALL {
            let spec = CorruptionSpec::new(kind, Severity::new(2).unwrap(), 9);
            let out = apply(&s, &spec, Some(&pack)).unwrap();
            assert_eq!(out.sequence.len(), s.len(), "{kind}");
            assert!(!out.resolved.is_empty());
            assert_eq!(out.occluder.is_some(), kind == CorruptionKind::Occlusion);
        }
    }

    #[test]
    fn occlusion_without_pack() {
        let spec = CorruptionSpec::new(CorruptionKind::Occlusion, Severity::new(1).unwrap(), 0);
        assert_eq!(apply(&seq(), &spec, None).unwrap_err(), Error::MissingMaskPack);
    }
}
