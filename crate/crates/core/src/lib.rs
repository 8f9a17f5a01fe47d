//! Multi-degradation image synthesis, classical restoration cues, a toy
//! multi-task control network, curriculum scheduling and quality metrics.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the width for callers that do not need the choice.

pub mod control;
pub mod cues;
pub mod curriculum;
pub mod degrade;
pub mod error;
pub mod metrics;
pub mod raster;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Image32 = raster::RasterImage<f32>;
pub type Image64 = raster::RasterImage<f64>;
pub type Kernel32 = raster::Kernel2D<f32>;
pub type Kernel64 = raster::Kernel2D<f64>;
pub type CueSet32 = cues::CueSet<f32>;
pub type CueSet64 = cues::CueSet<f64>;
pub type TransmissionMap32 = cues::TransmissionMap<f32>;
pub type TransmissionMap64 = cues::TransmissionMap<f64>;
pub type FeatureMap32 = control::FeatureMap<f32>;
pub type FeatureMap64 = control::FeatureMap<f64>;
pub type BlockWeights32 = control::BlockWeights<f32>;
pub type BlockWeights64 = control::BlockWeights<f64>;
pub type ControlStack32 = control::ControlStack<f32>;
pub type ControlStack64 = control::ControlStack<f64>;
