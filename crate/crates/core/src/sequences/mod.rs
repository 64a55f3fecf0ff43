//! Frame sequences: seeded uniform sampling over parameter ranges, and
//! smooth interpolation between waypoint poses.
//!
//! Every random draw for frame `i` comes from its own stream
//! (`DeterministicRng::pose_stream(seed, i)`), so a pose list depends only on
//! the sequence definition and seed, never on how frames are later scheduled.

mod rng;

pub use rng::{
    DeterministicRng, AUGMENT_STREAM_BIT, CURATION_CAP_STREAM, CURATION_SPLIT_STREAM,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{slerp_direction, ScenePose, UnitQuaternion, Vec3};

/// Haar-uniform random rotation: four standard normals, normalized.
pub fn uniform_unit_quaternion(rng: &mut DeterministicRng) -> UnitQuaternion {
    loop {
        let (a, b) = rng.normal_pair();
        let (c, d) = rng.normal_pair();
        if let Ok(q) = UnitQuaternion::new(a, b, c, d) {
            return q;
        }
    }
}

/// Uniform direction on the unit sphere (uniform `z`, uniform azimuth).
pub fn uniform_unit_vector(rng: &mut DeterministicRng) -> Vec3 {
    let z = rng.uniform_in(-1.0, 1.0);
    let phi = rng.uniform_in(0.0, std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    let v = Vec3::new(r * phi.cos(), r * phi.sin(), z);
    v / v.norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PositionRange {
    Fixed { fixed: Vec3 },
    Box { min: Vec3, max: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetRange {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationRange {
    Fixed(UnitQuaternion),
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionRange {
    /// Normalized before use.
    Fixed(Vec3),
    UniformRandom,
}

/// Ranges for uniform sampling of the six scene parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRanges {
    pub position: PositionRange,
    /// `[min, max]` meters.
    pub distance: [f64; 2],
    pub offset: OffsetRange,
    #[serde(with = "serde_yaml::with::singleton_map")]
    pub target_orientation: OrientationRange,
    #[serde(with = "serde_yaml::with::singleton_map")]
    pub background_orientation: OrientationRange,
    #[serde(with = "serde_yaml::with::singleton_map")]
    pub lighting_direction: DirectionRange,
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self {
            position: PositionRange::Fixed { fixed: Vec3::ZERO },
            distance: [10.0, 10.0],
            offset: OffsetRange {
                min: [0.5, 0.5],
                max: [0.5, 0.5],
            },
            target_orientation: OrientationRange::Fixed(UnitQuaternion::IDENTITY),
            background_orientation: OrientationRange::Fixed(UnitQuaternion::IDENTITY),
            lighting_direction: DirectionRange::Fixed(Vec3::new(0.0, 0.0, -1.0)),
        }
    }
}

impl ParameterRanges {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if let PositionRange::Box { min, max } = self.position {
            if !(min.is_finite() && max.is_finite())
                || min.x > max.x
                || min.y > max.y
                || min.z > max.z
            {
                return bad(format!("position box {min:?}..{max:?}"));
            }
        }
        let [dmin, dmax] = self.distance;
        if !(dmin.is_finite() && dmax.is_finite() && dmin > 0.0 && dmin <= dmax) {
            return bad(format!("distance range {:?}", self.distance));
        }
        let OffsetRange { min, max } = self.offset;
        for k in 0..2 {
            if !(0.0 <= min[k] && min[k] <= max[k] && max[k] <= 1.0) {
                return bad(format!("offset range {min:?}..{max:?}"));
            }
        }
        if let DirectionRange::Fixed(d) = self.lighting_direction {
            if d.try_normalize().is_none() {
                return bad("zero lighting direction".into());
            }
        }
        Ok(())
    }

    /// Draws one pose from `rng`. Fixed parameters consume no randomness.
    pub fn sample(&self, rng: &mut DeterministicRng) -> ScenePose {
        let position = match self.position {
            PositionRange::Fixed { fixed } => fixed,
            PositionRange::Box { min, max } => Vec3::new(
                rng.uniform_in(min.x, max.x),
                rng.uniform_in(min.y, max.y),
                rng.uniform_in(min.z, max.z),
            ),
        };
        let distance = rng.uniform_in(self.distance[0], self.distance[1]);
        let offset = [
            rng.uniform_in(self.offset.min[0], self.offset.max[0]),
            rng.uniform_in(self.offset.min[1], self.offset.max[1]),
        ];
        let mut orientation = |r: OrientationRange| match r {
            OrientationRange::Fixed(q) => q,
            OrientationRange::UniformRandom => uniform_unit_quaternion(rng),
        };
        let target_orientation = orientation(self.target_orientation);
        let background_orientation = orientation(self.background_orientation);
        let lighting_direction = match self.lighting_direction {
            DirectionRange::Fixed(d) => d / d.norm(),
            DirectionRange::UniformRandom => uniform_unit_vector(rng),
        };
        ScenePose {
            position,
            distance,
            offset,
            target_orientation,
            background_orientation,
            lighting_direction,
        }
    }
}

/// Draws `count` poses; frame `i` uses stream `i` of `seed`.
pub fn sample_random(ranges: &ParameterRanges, count: usize, seed: u64) -> Result<Vec<ScenePose>> {
    ranges.validate()?;
    Ok((0..count as u64)
        .map(|i| ranges.sample(&mut DeterministicRng::pose_stream(seed, i)))
        .collect())
}

/// Interpolates `frames_per_segment` frames per consecutive waypoint pair
/// (at `t = j/K`, `j = 0..K`) and appends the final waypoint once.
pub fn interpolate(waypoints: &[ScenePose], frames_per_segment: usize) -> Result<Vec<ScenePose>> {
    if waypoints.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "interpolation needs at least 2 waypoints, got {}",
            waypoints.len()
        )));
    }
    if frames_per_segment == 0 {
        return Err(Error::InvalidParameter(
            "frames_per_segment must be at least 1".into(),
        ));
    }
    for w in waypoints {
        w.validate()?;
    }
    let k = frames_per_segment;
    let mut out = Vec::with_capacity((waypoints.len() - 1) * k + 1);
    for pair in waypoints.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.lighting_direction.dot(b.lighting_direction) < -1.0 + 1e-9 {
            return Err(Error::AmbiguousArc);
        }
        for j in 0..k {
            let t = j as f64 / k as f64;
            out.push(blend(a, b, t)?);
        }
    }
    out.push(*waypoints.last().unwrap());
    Ok(out)
}

fn blend(a: &ScenePose, b: &ScenePose, t: f64) -> Result<ScenePose> {
    if t == 0.0 {
        return Ok(*a);
    }
    let lerp = |x: f64, y: f64| x + (y - x) * t;
    Ok(ScenePose {
        position: a.position.lerp(b.position, t),
        distance: lerp(a.distance, b.distance),
        offset: [lerp(a.offset[0], b.offset[0]), lerp(a.offset[1], b.offset[1])],
        target_orientation: a.target_orientation.slerp(&b.target_orientation, t)?,
        background_orientation: a.background_orientation.slerp(&b.background_orientation, t)?,
        lighting_direction: slerp_direction(a.lighting_direction, b.lighting_direction, t)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceMode {
    Random {
        count: usize,
    },
    Interpolated {
        waypoints: Vec<ScenePose>,
        frames_per_segment: usize,
    },
}

/// A named, seeded frame sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequenceSpec")]
pub struct SequenceSpec {
    pub name: String,
    pub seed: u64,
    #[serde(flatten)]
    pub mode: SequenceMode,
}

// Flattened enums swallow unknown keys, so they are checked by hand first.
#[derive(Deserialize)]
struct RawSequenceSpec(serde_yaml::Mapping);

const SEQUENCE_KEYS: [&str; 6] = ["name", "seed", "mode", "count", "waypoints", "frames_per_segment"];

impl TryFrom<RawSequenceSpec> for SequenceSpec {
    type Error = String;

    fn try_from(raw: RawSequenceSpec) -> std::result::Result<Self, String> {
        for key in raw.0.keys() {
            let known = key.as_str().is_some_and(|k| SEQUENCE_KEYS.contains(&k));
            if !known {
                let shown = serde_yaml::to_string(key).unwrap_or_default();
                return Err(format!(
                    "unknown field `{}`, expected one of {}",
                    shown.trim(),
                    SEQUENCE_KEYS.join(", ")
                ));
            }
        }
        #[derive(Deserialize)]
        struct Shape {
            name: String,
            seed: u64,
            #[serde(flatten)]
            mode: SequenceMode,
        }
        let mut shape: Shape =
            serde_yaml::from_value(serde_yaml::Value::Mapping(raw.0)).map_err(|e| e.to_string())?;
        // Written directions are normalized, as for fixed ranges.
        if let SequenceMode::Interpolated { waypoints, .. } = &mut shape.mode {
            for (i, w) in waypoints.iter_mut().enumerate() {
                w.lighting_direction = w
                    .lighting_direction
                    .try_normalize()
                    .ok_or_else(|| format!("waypoint {i}: zero lighting direction"))?;
            }
        }
        Ok(SequenceSpec { name: shape.name, seed: shape.seed, mode: shape.mode })
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::InvalidParameter(format!(
                "sequence name '{}' must be non-empty without path separators",
                self.name
            )));
        }
        match &self.mode {
            SequenceMode::Random { count } if *count == 0 => Err(Error::InvalidParameter(
                "random sequence count must be at least 1".into(),
            )),
            SequenceMode::Interpolated {
                waypoints,
                frames_per_segment,
            } if waypoints.len() < 2 || *frames_per_segment == 0 => {
                Err(Error::InvalidParameter(
                    "interpolated sequence needs >= 2 waypoints and frames_per_segment >= 1"
                        .into(),
                ))
            }
            SequenceMode::Interpolated { waypoints, .. } => {
                for (i, w) in waypoints.iter().enumerate() {
                    w.validate()
                        .map_err(|e| Error::InvalidParameter(format!("waypoint {i}: {e}")))?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Expands the sequence into its pose list. `ranges` is used only in random mode.
    pub fn poses(&self, ranges: &ParameterRanges) -> Result<Vec<ScenePose>> {
        self.validate()?;
        match &self.mode {
            SequenceMode::Random { count } => sample_random(ranges, *count, self.seed),
            SequenceMode::Interpolated {
                waypoints,
                frames_per_segment,
            } => interpolate(waypoints, *frames_per_segment),
        }
    }
}
