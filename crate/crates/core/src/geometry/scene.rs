use serde::{Deserialize, Serialize};

use super::{UnitQuaternion, Vec3};
use crate::error::{Error, Result};

/// Pinhole camera with square pixels and a principal point at the image center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width_px: u32,
    pub height_px: u32,
    /// Vertical field of view in radians, in `(0, π)`.
    pub vertical_fov: f64,
}

impl CameraIntrinsics {
    pub fn new(width_px: u32, height_px: u32, vertical_fov: f64) -> Result<Self> {
        let cam = Self {
            width_px,
            height_px,
            vertical_fov,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidParameter(format!(
                "camera size {}x{} must be positive",
                self.width_px, self.height_px
            )));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "vertical field of view {} rad outside (0, π)",
                self.vertical_fov
            )));
        }
        let f = self.focal_px();
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidParameter(format!("focal length {f} px")));
        }
        Ok(())
    }

    /// Focal length in pixels: `(height/2) / tan(fov/2)`.
    pub fn focal_px(&self) -> f64 {
        (self.height_px as f64 / 2.0) / (self.vertical_fov / 2.0).tan()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width_px as f64 / 2.0, self.height_px as f64 / 2.0)
    }

    /// Unit camera-frame ray through pixel coordinates `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let f = self.focal_px();
        let (cx, cy) = self.center();
        let d = Vec3::new((u - cx) / f, -(v - cy) / f, -1.0);
        d / d.norm()
    }
}

/// Six-parameter description of a single frame. Omitted fields take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenePose {
    /// World-frame anchor of the target origin, meters.
    pub position: Vec3,
    /// Camera-to-target range, meters.
    pub distance: f64,
    /// Normalized image location `(ox, oy)` of the target origin; `(0.5, 0.5)` is the center.
    pub offset: [f64; 2],
    /// Attitude of the target relative to the camera frame.
    pub target_orientation: UnitQuaternion,
    /// Attitude of the camera relative to the world frame.
    pub background_orientation: UnitQuaternion,
    /// Unit vector in the camera frame pointing from the sun toward the scene.
    pub lighting_direction: Vec3,
}

impl Default for ScenePose {
    fn default() -> Self {
        Self {
            position: Vec3::ZERO,
            distance: 10.0,
            offset: [0.5, 0.5],
            target_orientation: UnitQuaternion::IDENTITY,
            background_orientation: UnitQuaternion::IDENTITY,
            lighting_direction: Vec3::new(0.0, 0.0, -1.0),
        }
    }
}

impl ScenePose {
    pub fn validate(&self) -> Result<()> {
        let finite = self.position.is_finite()
            && self.distance.is_finite()
            && self.offset.iter().all(|o| o.is_finite())
            && self.lighting_direction.is_finite()
            && self
                .target_orientation
                .to_array()
                .iter()
                .chain(self.background_orientation.to_array().iter())
                .all(|c| c.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite scene parameter".into()));
        }
        if self.distance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "distance {} must be positive",
                self.distance
            )));
        }
        if self.offset.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::InvalidParameter(format!(
                "offset {:?} outside [0, 1]²",
                self.offset
            )));
        }
        let n = self.lighting_direction.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "lighting direction norm {n} is not 1"
            )));
        }
        Ok(())
    }
}

/// World-frame placement of camera, target and sun for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScene {
    pub camera_position: Vec3,
    /// Camera-to-world rotation.
    pub camera_orientation: UnitQuaternion,
    pub target_position: Vec3,
    pub target_orientation_world: UnitQuaternion,
    pub sun_direction_world: Vec3,
}

impl ResolvedScene {
    /// Camera-frame coordinates of a world point.
    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        self.camera_orientation
            .conjugate()
            .rotate(p - self.camera_position)
    }

    /// Camera-frame coordinates of a point given in the target's model frame.
    pub fn model_to_camera(&self, p: Vec3) -> Vec3 {
        self.world_to_camera(self.target_orientation_world.rotate(p) + self.target_position)
    }

    /// Target attitude expressed in the camera frame.
    pub fn target_orientation_camera(&self) -> UnitQuaternion {
        self.camera_orientation
            .conjugate()
            .multiply(&self.target_orientation_world)
    }

    /// Sun direction (from sun toward scene) in the camera frame.
    pub fn sun_direction_camera(&self) -> Vec3 {
        self.camera_orientation
            .conjugate()
            .rotate(self.sun_direction_world)
    }
}

/// Places camera, target and sun in the world frame.
///
/// The camera is positioned so that the ray through the offset pixel hits the
/// target origin at exactly `distance` meters.
pub fn resolve_scene(pose: &ScenePose, cam: &CameraIntrinsics) -> Result<ResolvedScene> {
    pose.validate()?;
    cam.validate()?;
    let u = pose.offset[0] * cam.width_px as f64;
    let v = pose.offset[1] * cam.height_px as f64;
    let ray_cam = cam.pixel_ray(u, v);
    let r = pose.background_orientation;
    let camera_position = pose.position - r.rotate(ray_cam) * pose.distance;
    Ok(ResolvedScene {
        camera_position,
        camera_orientation: r,
        target_position: pose.position,
        target_orientation_world: r.multiply(&pose.target_orientation),
        sun_direction_world: r.rotate(pose.lighting_direction),
    })
}

/// Pixel location and depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Positive depth along the optical axis, meters.
    pub z_cam: f64,
}

/// Pinhole projection of a world point.
pub fn project(point_world: Vec3, scene: &ResolvedScene, cam: &CameraIntrinsics) -> Result<Projection> {
    let p = scene.world_to_camera(point_world);
    project_camera_point(p, cam)
}

pub(crate) fn project_camera_point(p: Vec3, cam: &CameraIntrinsics) -> Result<Projection> {
    if !p.is_finite() {
        return Err(Error::InvalidParameter("non-finite point".into()));
    }
    if p.z >= 0.0 {
        return Err(Error::BehindCamera(p.z));
    }
    let f = cam.focal_px();
    let (cx, cy) = cam.center();
    let depth = -p.z;
    Ok(Projection {
        u: cx + f * (p.x / depth),
        v: cy - f * (p.y / depth),
        z_cam: depth,
    })
}
