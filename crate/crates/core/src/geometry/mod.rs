//! Vector and rotation math, the pinhole camera, and resolution of the six
//! scene parameters into world-frame placements.
//!
//! Camera frame convention: the camera looks along its −Z axis, +X points
//! right in the image and +Y points up. Pixel `(u, v)` has its origin at the
//! top-left image corner with `v` growing downwards; pixel `(i, j)` covers
//! `[i, i+1) × [j, j+1)`.

mod quat;
mod scene;
mod vec3;

pub use quat::{slerp_direction, UnitQuaternion, DEGENERATE_NORM};
pub use scene::{project, resolve_scene, CameraIntrinsics, Projection, ResolvedScene, ScenePose};
pub use vec3::Vec3;
