use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Norm below which a quaternion is considered unnormalizable.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Above this |dot| slerp falls back to normalized linear interpolation.
const SLERP_LINEAR_THRESHOLD: f64 = 1.0 - 1e-6;

/// Rotation stored as a unit quaternion (Hamilton convention, scalar first).
///
/// `q` and `-q` describe the same rotation; equality via [`UnitQuaternion::same_rotation`]
/// accounts for that, while `PartialEq` compares components literally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes `(w, x, y, z)` into a unit quaternion. Input that is already
    /// unit to within a few ulps is kept bit-for-bit, so stored values round-trip.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite quaternion ({w}, {x}, {y}, {z})"
            )));
        }
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateRotation(n));
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { w, x, y, z });
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    /// Rotation of `angle` radians about `axis` (right-handed).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let axis = axis
            .try_normalize()
            .ok_or_else(|| Error::InvalidParameter("zero rotation axis".into()))?;
        let (s, c) = (angle * 0.5).sin_cos();
        Self::new(c, axis.x * s, axis.y * s, axis.z * s)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Components in serialization order `(w, x, y, z)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, o: &UnitQuaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn conjugate(&self) -> UnitQuaternion {
        UnitQuaternion {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self ∘ rhs` (apply `rhs` first, then `self`).
    pub fn multiply(&self, rhs: &UnitQuaternion) -> UnitQuaternion {
        let (a, b) = (self, rhs);
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        // Renormalize so round-off never accumulates across long products.
        let n = (w * w + x * x + y * y + z * z).sqrt();
        UnitQuaternion {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    /// Rotates `v` by this quaternion (`q v q⁻¹`).
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn negated(&self) -> UnitQuaternion {
        UnitQuaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        2.0 * self.w.abs().min(1.0).acos()
    }

    /// Geodesic angle between two rotations, in `[0, π]`.
    pub fn angle_to(&self, o: &UnitQuaternion) -> f64 {
        2.0 * self.dot(o).abs().min(1.0).acos()
    }

    /// True when both quaternions encode the same rotation within `tol` per component.
    pub fn same_rotation(&self, o: &UnitQuaternion, tol: f64) -> bool {
        let close = |a: &UnitQuaternion, b: &UnitQuaternion| {
            a.to_array()
                .iter()
                .zip(b.to_array())
                .all(|(p, q)| (p - q).abs() <= tol)
        };
        close(self, o) || close(self, &o.negated())
    }

    /// Shortest-arc spherical interpolation, `t ∈ [0, 1]`.
    pub fn slerp(&self, other: &UnitQuaternion, t: f64) -> Result<UnitQuaternion> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "slerp parameter {t} outside [0, 1]"
            )));
        }
        let mut end = *other;
        let mut d = self.dot(other);
        if d < 0.0 {
            end = end.negated();
            d = -d;
        }
        if t == 0.0 {
            return Ok(*self);
        }
        if t == 1.0 {
            return Ok(end);
        }
        let (s0, s1) = if d > SLERP_LINEAR_THRESHOLD {
            (1.0 - t, t)
        } else {
            let theta = d.min(1.0).acos();
            let sin_theta = theta.sin();
            (
                ((1.0 - t) * theta).sin() / sin_theta,
                (t * theta).sin() / sin_theta,
            )
        };
        UnitQuaternion::new(
            s0 * self.w + s1 * end.w,
            s0 * self.x + s1 * end.x,
            s0 * self.y + s1 * end.y,
            s0 * self.z + s1 * end.z,
        )
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = Error;
    fn try_from(a: [f64; 4]) -> Result<Self> {
        UnitQuaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.to_array()
    }
}

/// Spherical interpolation between unit vectors along their minimal arc.
///
/// Fails with [`Error::AmbiguousArc`] when the vectors are (nearly) antipodal.
pub fn slerp_direction(a: Vec3, b: Vec3, t: f64) -> Result<Vec3> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation parameter {t} outside [0, 1]"
        )));
    }
    let d = a.dot(b).clamp(-1.0, 1.0);
    if d < -1.0 + 1e-9 {
        return Err(Error::AmbiguousArc);
    }
    if t == 0.0 {
        return Ok(a);
    }
    if t == 1.0 {
        return Ok(b);
    }
    let v = if d > SLERP_LINEAR_THRESHOLD {
        a.lerp(b, t)
    } else {
        let theta = d.acos();
        let s = theta.sin();
        a * (((1.0 - t) * theta).sin() / s) + b * ((t * theta).sin() / s)
    };
    v.try_normalize()
        .ok_or_else(|| Error::Internal("direction interpolation collapsed".into()))
}
