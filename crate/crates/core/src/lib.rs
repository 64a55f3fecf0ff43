//! Synthetic image generation and dataset tooling for spacecraft pose
//! estimation: scene geometry, rasterization, augmentation, imagesets,
//! curation, a model registry, detection evaluation and object storage.

pub mod cli;
pub mod compositor;
pub mod curation;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod imageset;
pub mod registry;
pub mod render;
pub mod sequences;
pub mod storage;

pub use error::{Error, Result};
