//! Corruption taxonomy and the per-severity parameter schedules.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Severity level, 1 (mildest) to 5 (most severe).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const ALL: [Severity; 5] = [Severity(1), Severity(2), Severity(3), Severity(4), Severity(5)];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::InvalidSeverity(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    /// Zero-based index into a five-entry schedule.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for Severity {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionFamily {
    Digital,
    Temporal,
    Environmental,
    Occlusion,
}

impl CorruptionFamily {
    pub const ALL: [CorruptionFamily; 4] = [
        CorruptionFamily::Digital,
        CorruptionFamily::Temporal,
        CorruptionFamily::Environmental,
        CorruptionFamily::Occlusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionFamily::Digital => "digital",
            CorruptionFamily::Temporal => "temporal",
            CorruptionFamily::Environmental => "environmental",
            CorruptionFamily::Occlusion => "occlusion",
        }
    }
}

impl fmt::Display for CorruptionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The fifteen corruption kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    SpeckleNoise,
    ShotNoise,
    ImpulseNoise,
    DefocusBlur,
    ZoomBlur,
    MotionBlur,
    ZoomIn,
    Freeze,
    Sampling,
    LowLight,
    Fog,
    Rain,
    Snow,
    Occlusion,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 15] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::SpeckleNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::DefocusBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomIn,
        CorruptionKind::Freeze,
        CorruptionKind::Sampling,
        CorruptionKind::LowLight,
        CorruptionKind::Fog,
        CorruptionKind::Rain,
        CorruptionKind::Snow,
        CorruptionKind::Occlusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::SpeckleNoise => "speckle_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomIn => "zoom_in",
            CorruptionKind::Freeze => "freeze",
            CorruptionKind::Sampling => "sampling",
            CorruptionKind::LowLight => "low_light",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Rain => "rain",
            CorruptionKind::Snow => "snow",
            CorruptionKind::Occlusion => "occlusion",
        }
    }

    pub fn family(self) -> CorruptionFamily {
        use CorruptionKind::*;
        match self {
            GaussianNoise | SpeckleNoise | ShotNoise | ImpulseNoise | DefocusBlur | ZoomBlur
            | MotionBlur | ZoomIn => CorruptionFamily::Digital,
            Freeze | Sampling => CorruptionFamily::Temporal,
            LowLight | Fog | Rain | Snow => CorruptionFamily::Environmental,
            Occlusion => CorruptionFamily::Occlusion,
        }
    }

    /// Position in [`CorruptionKind::ALL`].
    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    /// Whether the kernel draws from the rng at all.
    pub fn is_stochastic(self) -> bool {
        !matches!(
            self,
            CorruptionKind::ZoomBlur
                | CorruptionKind::DefocusBlur
                | CorruptionKind::ZoomIn
                | CorruptionKind::Sampling
                | CorruptionKind::LowLight
                | CorruptionKind::Snow
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        if norm == "static" {
            return Ok(CorruptionKind::Occlusion);
        }
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::UnknownCorruption(s.to_string()))
    }
}

/// A fully determined corruption application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub family: CorruptionFamily,
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: Severity, seed: u64) -> Self {
        Self { family: kind.family(), kind, severity, seed }
    }

    /// Checks that `family` agrees with the taxonomy; relevant after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.kind.family() != self.family {
            return Err(Error::InvalidConfig(alloc::format!(
                "{} belongs to the {} family, not {}",
                self.kind,
                self.kind.family(),
                self.family
            )));
        }
        Ok(())
    }
}

/// Rain preset names of the original schedule; severity 3 has none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RainType {
    Drizzle,
    Default,
    Heavy,
    Torrential,
}

impl RainType {
    /// Frame area per rain streak.
    pub fn area_per_drop(self) -> usize {
        match self {
            RainType::Drizzle => 770,
            RainType::Default | RainType::Heavy => 600,
            RainType::Torrential => 500,
        }
    }
}

/// Parameters for one (kind, severity) cell of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeverityParams {
    GaussianNoise { sigma: f64 },
    SpeckleNoise { scale: f64 },
    ShotNoise { photons: f64 },
    ImpulseNoise { amount: f64 },
    DefocusBlur { radius: usize, alias_sigma: f64 },
    ZoomBlur { max_zoom: f64 },
    MotionBlur { radius: usize, sigma: f64 },
    ZoomIn { max_zoom: f64 },
    Freeze { fraction: f64 },
    Sampling { rate: usize },
    LowLight { strength: u8 },
    Fog { coefficient: f64 },
    Rain { rain_type: RainType, brightness: f64, drop_length: usize },
    Snow { coefficient: f64 },
    Occlusion { quintile: u8 },
}

const GAUSSIAN_SIGMA: [f64; 5] = [0.08, 0.12, 0.18, 0.26, 0.38];
const SPECKLE_SCALE: [f64; 5] = [0.15, 0.2, 0.25, 0.3, 0.35];
const SHOT_PHOTONS: [f64; 5] = [250.0, 100.0, 50.0, 30.0, 15.0];
const IMPULSE_AMOUNT: [f64; 5] = [0.03, 0.06, 0.09, 0.17, 0.27];
const DEFOCUS_RADIUS: [usize; 5] = [3, 4, 6, 8, 10];
const DEFOCUS_ALIAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const ZOOM_BLUR_MAX: [f64; 5] = [1.11, 1.16, 1.21, 1.26, 1.31];
const MOTION_BLUR: [(usize, f64); 5] = [(10, 3.0), (15, 5.0), (15, 8.0), (15, 12.0), (20, 15.0)];
const ZOOM_IN_MAX: [f64; 5] = [1.5, 2.0, 2.5, 3.0, 3.5];
// Non-monotone: severity 5 repeats the severity 3 proportion.
const FREEZE_FRACTION: [f64; 5] = [0.40, 0.20, 0.10, 0.05, 0.10];
const SAMPLING_RATE: [usize; 5] = [2, 4, 8, 16, 32];
const FOG_COEF: [f64; 5] = [0.49, 0.59, 0.69, 0.79, 0.89];
const RAIN: [(RainType, f64, usize); 5] = [
    (RainType::Drizzle, 0.7, 5),
    (RainType::Drizzle, 0.7, 15),
    (RainType::Default, 0.6, 20),
    (RainType::Heavy, 0.55, 40),
    (RainType::Torrential, 0.5, 50),
];
const SNOW_COEF: [f64; 5] = [0.05, 0.1, 0.15, 0.2, 0.25];

/// Looks up the schedule entry for `(kind, severity)`.
pub fn severity_params(kind: CorruptionKind, severity: Severity) -> SeverityParams {
    let i = severity.index();
    match kind {
        CorruptionKind::GaussianNoise => SeverityParams::GaussianNoise { sigma: GAUSSIAN_SIGMA[i] },
        CorruptionKind::SpeckleNoise => SeverityParams::SpeckleNoise { scale: SPECKLE_SCALE[i] },
        CorruptionKind::ShotNoise => SeverityParams::ShotNoise { photons: SHOT_PHOTONS[i] },
        CorruptionKind::ImpulseNoise => SeverityParams::ImpulseNoise { amount: IMPULSE_AMOUNT[i] },
        CorruptionKind::DefocusBlur => SeverityParams::DefocusBlur {
            radius: DEFOCUS_RADIUS[i],
            alias_sigma: DEFOCUS_ALIAS[i],
        },
        CorruptionKind::ZoomBlur => SeverityParams::ZoomBlur { max_zoom: ZOOM_BLUR_MAX[i] },
        CorruptionKind::MotionBlur => {
            let (radius, sigma) = MOTION_BLUR[i];
            SeverityParams::MotionBlur { radius, sigma }
        }
        CorruptionKind::ZoomIn => SeverityParams::ZoomIn { max_zoom: ZOOM_IN_MAX[i] },
        CorruptionKind::Freeze => SeverityParams::Freeze { fraction: FREEZE_FRACTION[i] },
        CorruptionKind::Sampling => SeverityParams::Sampling { rate: SAMPLING_RATE[i] },
        CorruptionKind::LowLight => SeverityParams::LowLight { strength: severity.level() },
        CorruptionKind::Fog => SeverityParams::Fog { coefficient: FOG_COEF[i] },
        CorruptionKind::Rain => {
            let (rain_type, brightness, drop_length) = RAIN[i];
            SeverityParams::Rain { rain_type, brightness, drop_length }
        }
        CorruptionKind::Snow => SeverityParams::Snow { coefficient: SNOW_COEF[i] },
        CorruptionKind::Occlusion => SeverityParams::Occlusion { quintile: severity.level() },
    }
}

/// String-keyed lookup, for callers holding kind names from config files.
pub fn severity_params_by_name(kind: &str, severity: u8) -> Result<SeverityParams> {
    let kind: CorruptionKind = kind.parse()?;
    Ok(severity_params(kind, Severity::new(severity)?))
}

/// Name of a kind plus its severity, e.g. `fog-s3`; used for output directories.
pub fn cell_label(kind: CorruptionKind, severity: Severity) -> String {
    alloc::format!("{}-s{}", kind.name(), severity.level())
}
