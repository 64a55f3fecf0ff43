//! Slerp between waypoints and show how pose and label move across the pass.

use orbitforge::geometry::{resolve_scene, CameraIntrinsics, ScenePose, UnitQuaternion, Vec3};
use orbitforge::render::{derive_labels, render, RenderSettings, TriangleMesh};
use orbitforge::sequences::{SequenceMode, SequenceSpec, ParameterRanges};

fn main() -> orbitforge::Result<()> {
    let far = ScenePose {
        distance: 40.0,
        offset: [0.2, 0.3],
        target_orientation: UnitQuaternion::IDENTITY,
        ..ScenePose::default()
    };
    let near = ScenePose {
        distance: 8.0,
        offset: [0.5, 0.5],
        target_orientation: UnitQuaternion::from_axis_angle(Vec3::Y, 2.0)?,
        lighting_direction: Vec3::new(0.0, -1.0, 0.0),
        ..ScenePose::default()
    };
    let spec = SequenceSpec {
        name: "approach".into(),
        seed: 0,
        mode: SequenceMode::Interpolated { waypoints: vec![far, near], frames_per_segment: 8 },
    };
    let poses = spec.poses(&ParameterRanges::default())?;

    let cam = CameraIntrinsics::new(160, 120, 50f64.to_radians())?;
    let mesh = TriangleMesh::cuboid(Vec3::new(-1.0, -0.6, -0.6), Vec3::new(1.0, 0.6, 0.6));
    println!("{:>5} {:>8} {:>10} {:>8}  bbox", "frame", "range", "rotation", "pixels");
    for (i, pose) in poses.iter().enumerate() {
        let scene = resolve_scene(pose, &cam)?;
        let labels = derive_labels(&render(&mesh, &scene, &cam, &RenderSettings::default())?, &scene, &cam, &[]);
        println!(
            "{i:>5} {:>8.2} {:>9.1}° {:>8}  {:?}",
            pose.distance,
            pose.target_orientation.angle().to_degrees(),
            labels.visible_pixel_count,
            labels.bbox
        );
    }
    Ok(())
}
