//! Connectivity-mask machinery for salient object detection.
//!
//! Instead of predicting a per-pixel saliency score directly, the pipeline
//! here works on 8-channel *connectivity* grids: each channel states
//! whether a pixel is connected to one of its 8 neighbors. The crate
//! provides
//!
//! - a codec between binary saliency masks and connectivity grids
//!   ([`codec`]), including edge extraction from mixed zero/one vectors;
//! - bilateral voting and region-guided channel aggregation with analytic
//!   gradients ([`ops`]);
//! - the combined training loss over connectivity outputs ([`loss`]);
//! - saliency evaluation metrics ([`metrics`]);
//! - a seeded synthetic dataset, a small convolutional model with
//!   hand-written backprop, and training/ablation harnesses ([`dataset`],
//!   [`model`], [`pipeline`]);
//! - deterministic file formats and reports ([`io`]).
//!
//! All numeric code is generic over the scalar type via [`Real`]; the
//! `*32`/`*64` aliases below pick concrete widths.

pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod pipeline;
mod scalar;

pub use error::{Error, Result};
pub use grid::{ConnGrid, Map, Mask, CHANNELS};
pub use scalar::Real;

/// Single-precision scalar map.
pub type Map32 = Map<f32>;
/// Double-precision scalar map.
pub type Map64 = Map<f64>;
/// Single-precision connectivity grid (the width stored in grid files).
pub type ConnGrid32 = ConnGrid<f32>;
/// Double-precision connectivity grid (training and gradient checks).
pub type ConnGrid64 = ConnGrid<f64>;
