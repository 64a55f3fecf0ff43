use serde::{Deserialize, Serialize};

use super::{RenderOutput, MASK_ON};
use crate::geometry::{project, CameraIntrinsics, ResolvedScene, UnitQuaternion, Vec3};

/// Target pose relative to the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Camera-frame coordinates of the target origin, meters.
    pub translation: Vec3,
    /// Target attitude in the camera frame.
    pub orientation: UnitQuaternion,
}

/// Ground-truth labels derived from one render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    /// Tight inclusive pixel box `[xmin, ymin, xmax, ymax]`; absent when nothing is visible.
    pub bbox: Option<[u32; 4]>,
    /// Projection of the target origin; absent when the origin is behind the camera.
    pub origin_px: Option<[f64; 2]>,
    pub pose_camera: CameraPose,
    pub visible_pixel_count: u64,
    /// Projections of the requested model-frame keypoints, in input order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keypoints_px: Vec<Option<[f64; 2]>>,
}

impl LabelSet {
    /// False when the mask is empty; such frames are kept but carry no box.
    pub fn target_visible(&self) -> bool {
        self.visible_pixel_count > 0
    }
}

/// Derives labels from the mask and the scene geometry.
///
/// `keypoints` are model-frame points; each is projected independently and is
/// `None` when it falls behind the camera.
pub fn derive_labels(
    out: &RenderOutput,
    scene: &ResolvedScene,
    cam: &CameraIntrinsics,
    keypoints: &[Vec3],
) -> LabelSet {
    let mut count = 0u64;
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (u32::MAX, u32::MAX, 0u32, 0u32);
    for (x, y, p) in out.mask.enumerate_pixels() {
        if p.0[0] == MASK_ON {
            count += 1;
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    let bbox = (count > 0).then_some([xmin, ymin, xmax, ymax]);
    let origin_px = project(scene.target_position, scene, cam)
        .ok()
        .map(|p| [p.u, p.v]);
    let keypoints_px = keypoints
        .iter()
        .map(|k| {
            let world = scene.target_orientation_world.rotate(*k) + scene.target_position;
            project(world, scene, cam).ok().map(|p| [p.u, p.v])
        })
        .collect();
    LabelSet {
        bbox,
        origin_px,
        pose_camera: CameraPose {
            translation: scene.world_to_camera(scene.target_position),
            orientation: scene.target_orientation_camera(),
        },
        visible_pixel_count: count,
        keypoints_px,
    }
}
