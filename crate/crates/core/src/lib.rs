//! Deterministic frame-sequence corruptions and robustness metrics for gait
//! recognition benchmarks.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure function
//! of its inputs and a seed: file formats, image codecs and the command line
//! live in the `gaitcorrupt` companion crate.
//!
//! Corruptions are grouped in four families:
//!
//! * [`digital`]: sensor noise, blurs and a progressive zoom.
//! * [`temporal`]: frame freezes and frame-rate reduction.
//! * [`environmental`]: low light, fog, rain and snow.
//! * [`occlusion`]: static occluders pasted from a [`occlusion::MaskPack`].
//!
//! [`corrupt::apply`] dispatches a [`CorruptionSpec`] to the right kernel.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corrupt;
pub mod digital;
pub mod distill;
pub mod environmental;
pub mod error;
pub mod frame;
pub mod metrics;
pub mod occlusion;
pub mod protocols;
pub mod rng;
pub mod severity;
pub mod temporal;

mod sample;

pub use corrupt::{apply, Corrupted};
pub use error::{Error, Result};
pub use frame::{denormalize, normalize, round_half_away, Frame, FrameSequence, RealFrame};
pub use rng::SeededRng;
pub use severity::{
    severity_params, CorruptionFamily, CorruptionKind, CorruptionSpec, RainType, Severity,
    SeverityParams,
};

/// Version string recorded in corruption manifests.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
