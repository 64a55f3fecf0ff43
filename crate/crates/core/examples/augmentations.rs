//! Apply each post-processing effect on its own to one render, then the whole
//! chain, writing one PNG per variant.

use std::path::{Path, PathBuf};

use orbitforge::compositor::{AugmentationSpec, AugmentationStep, BackgroundMode, Compositor, Effect};
use orbitforge::geometry::{resolve_scene, CameraIntrinsics, ScenePose, Vec3};
use orbitforge::render::{load_mesh, render, RenderSettings};
use orbitforge::sequences::DeterministicRng;
use orbitforge::Error;

fn main() -> orbitforge::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/augmentations".into()));
    std::fs::create_dir_all(&out).map_err(|e| Error::io("creating output dir", e))?;

    let mesh = load_mesh(root.join("assets/satellite.obj"))?.with_albedo([0.95, 0.9, 0.8]);
    let cam = CameraIntrinsics::new(320, 240, 40f64.to_radians())?;
    let pose = ScenePose {
        distance: 16.0,
        lighting_direction: Vec3::new(0.3, -0.2, -0.93).try_normalize().unwrap(),
        ..ScenePose::default()
    };
    let frame = render(&mesh, &resolve_scene(&pose, &cam)?, &cam, &RenderSettings::default())?;

    let background = Effect::Background {
        mode: BackgroundMode::Image,
        path: Some("assets/backgrounds/earth_limb.png".into()),
        strict: true,
    };
    let variants = [
        ("background", background.clone()),
        ("blur", Effect::GaussianBlur { sigma: 2.0 }),
        ("bloom", Effect::Bloom { threshold: 0.6, radius: 6.0, gain: 0.8 }),
        ("star", Effect::Star { threshold: 0.8, num_streaks: 6, length: 40, gain: 0.7 }),
        ("exposure", Effect::Exposure { scale: 1.6 }),
    ];

    let mut chain = Vec::new();
    for (name, effect) in variants {
        let spec = AugmentationSpec { steps: vec![AugmentationStep::new(effect.clone(), 1.0)] };
        let img = Compositor::new(&spec, root)?.apply(&frame, &mut DeterministicRng::for_stream(0, 0))?;
        img.color.save(out.join(format!("{name}.png")))?;
        chain.push(AugmentationStep::new(effect, 0.5).tagged(name));
    }

    // The chain with 50% odds per step: the fired tags differ per stream.
    let chained = Compositor::new(&AugmentationSpec { steps: chain }, root)?;
    for stream in 0..4 {
        let img = chained.apply(&frame, &mut DeterministicRng::augment_stream(7, stream))?;
        img.color.save(out.join(format!("chain_{stream}.png")))?;
        println!("chain_{stream}.png  {:?}", img.tags);
    }
    Ok(())
}
