//! Triangle-mesh loading, z-buffered rasterization with Lambertian sun
//! lighting, and ground-truth label derivation.
//!
//! Shading per pixel is `albedo · (ambient + (1 − ambient)·max(0, n̂·(−sun)))`
//! with the normal flipped toward the camera, quantized as `round(255·value)`.

mod depth;
mod labels;
mod mesh;
mod raster;

pub use depth::{DepthMap, DEPTH_HEADER_LEN, DEPTH_MAGIC};
pub use labels::{derive_labels, CameraPose, LabelSet};
pub use mesh::{load_mesh, parse_obj, TriangleMesh};
pub use raster::{render, RenderOutput, RenderSettings, MASK_ON};
