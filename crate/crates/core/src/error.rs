use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown corruption kind `{0}`")]
    UnknownCorruption(String),
    #[error("severity must be in 1..=5, got {0}")]
    InvalidSeverity(u8),
    #[error("frame sequence is empty")]
    EmptySequence,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: String, found: String },
    #[error("frame {height}x{width} is too small for a kernel of radius {radius}")]
    FrameTooSmall { height: usize, width: usize, radius: usize },
    #[error("mask pack needs at least 5 entries, found {0}")]
    PackTooSmall(usize),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("occlusion requires a mask pack")]
    MissingMaskPack,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("probe set is empty")]
    EmptyProbes,
    #[error("clean accuracy must be positive, got {0}")]
    InvalidBaseline(f64),
    #[error("invalid accuracy: {0}")]
    InvalidAccuracy(String),
    #[error("split produced an empty {0} set")]
    EmptySplit(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no corrupted counterpart for sequence `{0}`")]
    MissingCounterpart(String),
    #[error("batch needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("batch contains no valid (anchor, positive, negative) triplet")]
    NoValidTriplet,
    #[error("invalid loss input: {0}")]
    InvalidLoss(String),
}
