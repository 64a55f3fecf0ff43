//! Render one frame of the bundled satellite and write color, mask and depth.
//!
//! ```bash
//! cargo run --example render_frame -- out/frame
//! ```

use std::path::{Path, PathBuf};

use orbitforge::geometry::{resolve_scene, CameraIntrinsics, ScenePose, UnitQuaternion, Vec3};
use orbitforge::render::{derive_labels, load_mesh, render, RenderSettings};

fn main() -> orbitforge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/render_frame".into()));
    std::fs::create_dir_all(&out).map_err(|e| orbitforge::Error::io("creating output dir", e))?;

    let mesh = load_mesh(Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/satellite.obj"))?
        .with_albedo([0.85, 0.8, 0.7]);
    let cam = CameraIntrinsics::new(640, 480, 45f64.to_radians())?;

    let pose = ScenePose {
        distance: 18.0,
        offset: [0.45, 0.55],
        target_orientation: UnitQuaternion::from_axis_angle(Vec3::new(1.0, 1.0, 0.2), 0.9)?,
        lighting_direction: Vec3::new(-0.6, -0.3, -0.74).try_normalize().unwrap(),
        ..ScenePose::default()
    };
    let scene = resolve_scene(&pose, &cam)?;
    let frame = render(&mesh, &scene, &cam, &RenderSettings::default())?;

    // Keypoints: origin and the two panel tips.
    let keypoints = [Vec3::ZERO, Vec3::new(-3.4, 0.0, 0.0), Vec3::new(3.4, 0.0, 0.0)];
    let labels = derive_labels(&frame, &scene, &cam, &keypoints);

    frame.color.save(out.join("color.png"))?;
    frame.mask.save(out.join("mask.png"))?;
    std::fs::write(out.join("depth.bin"), frame.depth.to_bytes())
        .map_err(|e| orbitforge::Error::io("writing depth", e))?;

    println!("bbox            {:?}", labels.bbox);
    println!("visible pixels  {}", labels.visible_pixel_count);
    println!("origin          {:?}", labels.origin_px);
    println!("keypoints       {:?}", labels.keypoints_px);
    println!("wrote {}", out.display());
    Ok(())
}
