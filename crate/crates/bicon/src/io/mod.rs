//! File formats: P5 images, connectivity grids, checkpoints, and CSV
//! metric reports. Every format is deterministic byte-for-byte.

pub mod checkpoint;
pub mod conn;
pub mod pgm;
pub mod report;
