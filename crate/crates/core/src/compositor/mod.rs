//! Post-render augmentations: background replacement, Gaussian blur,
//! bloom (fog glow), star streaks (lens flare) and exposure.
//!
//! Effects consume and produce color rasters only; masks, depth and labels
//! are never touched. Luma is Rec. 601 (`0.299R + 0.587G + 0.114B`).

mod filters;

pub use filters::{
    black, bloom, blur_float, bright_pass, composite_background, exposure, gaussian_blur,
    gaussian_kernel, luma, star, star_response, FloatImage,
};

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::RenderOutput;
use crate::sequences::DeterministicRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    Black,
    /// A single image file.
    Image,
    /// One image per frame, picked from a directory.
    Directory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    Background {
        mode: BackgroundMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        /// Fail the frame on an unreadable image instead of falling back to black.
        #[serde(default)]
        strict: bool,
    },
    GaussianBlur {
        sigma: f64,
    },
    Bloom {
        threshold: f64,
        radius: f64,
        gain: f64,
    },
    Star {
        threshold: f64,
        num_streaks: u32,
        length: u32,
        gain: f64,
    },
    Exposure {
        scale: f64,
    },
}

fn always() -> f64 {
    1.0
}

/// One pipeline step: an effect, its per-frame firing probability, and an
/// optional tag attached to frames where it fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationStep {
    #[serde(default = "always")]
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(flatten)]
    pub effect: Effect,
}

impl AugmentationStep {
    pub fn new(effect: Effect, probability: f64) -> Self {
        Self {
            probability,
            tag: None,
            effect,
        }
    }

    pub fn tagged(mut self, tag: &str) -> Self {
        self.tag = Some(tag.to_string());
        self
    }
}

/// Ordered augmentation steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSpec {
    #[serde(default)]
    pub steps: Vec<AugmentationStep>,
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate() {
            let bad = |m: String| Err(Error::InvalidParameter(format!("augmentation step {i}: {m}")));
            if !(0.0..=1.0).contains(&step.probability) {
                return bad(format!("probability {} outside [0, 1]", step.probability));
            }
            if let Some(t) = &step.tag {
                if t.is_empty() || t.contains(',') {
                    return bad(format!("tag '{t}' must be non-empty without commas"));
                }
            }
            match &step.effect {
                Effect::Background { mode, path, .. } => {
                    if *mode != BackgroundMode::Black && path.is_none() {
                        return bad("background image/directory mode needs a path".into());
                    }
                }
                Effect::GaussianBlur { sigma } => {
                    if !(sigma.is_finite() && *sigma >= 0.0) {
                        return bad(format!("sigma {sigma}"));
                    }
                }
                Effect::Bloom {
                    threshold,
                    radius,
                    gain,
                } => {
                    if !(0.0..=1.0).contains(threshold)
                        || !(radius.is_finite() && *radius >= 0.0)
                        || !(gain.is_finite() && *gain >= 0.0)
                    {
                        return bad("bloom needs threshold in [0,1], radius >= 0, gain >= 0".into());
                    }
                }
                Effect::Star {
                    threshold,
                    num_streaks,
                    length,
                    gain,
                } => {
                    if !(0.0..=1.0).contains(threshold)
                        || *num_streaks < 2
                        || *length == 0
                        || !(gain.is_finite() && *gain >= 0.0)
                    {
                        return bad(
                            "star needs threshold in [0,1], num_streaks >= 2, length >= 1, gain >= 0"
                                .into(),
                        );
                    }
                }
                Effect::Exposure { scale } => {
                    if !(scale.is_finite() && *scale > 0.0) {
                        return bad(format!("exposure scale {scale}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Image files of a background directory, sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundPool {
    pub files: Vec<PathBuf>,
}

impl BackgroundPool {
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| Error::io(format!("listing backgrounds in {}", dir.display()), e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry
                .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
                .path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!(
                "background directory {} holds no PNG/JPEG images",
                dir.display()
            )));
        }
        Ok(Self { files })
    }

    /// Picks a file with one uniform draw.
    pub fn pick(&self, rng: &mut DeterministicRng) -> &Path {
        let i = ((rng.uniform() * self.files.len() as f64) as usize).min(self.files.len() - 1);
        &self.files[i]
    }
}

#[derive(Debug, Clone)]
enum PreparedEffect {
    Background {
        source: BackgroundSource,
        strict: bool,
    },
    Other(Effect),
}

#[derive(Debug, Clone)]
enum BackgroundSource {
    Black,
    Image(PathBuf),
    Pool(BackgroundPool),
}

/// A validated augmentation spec with background directories resolved.
#[derive(Debug, Clone)]
pub struct Compositor {
    steps: Vec<(f64, Option<String>, PreparedEffect)>,
}

/// Augmented color raster plus the tags of steps that fired.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub color: RgbImage,
    pub tags: Vec<String>,
}

impl Compositor {
    /// Relative background paths are resolved against `base_dir`.
    pub fn new(spec: &AugmentationSpec, base_dir: &Path) -> Result<Self> {
        spec.validate()?;
        let mut steps = Vec::with_capacity(spec.steps.len());
        for step in &spec.steps {
            let prepared = match &step.effect {
                Effect::Background { mode, path, strict } => {
                    let resolve = |p: &PathBuf| base_dir.join(p);
                    let source = match mode {
                        BackgroundMode::Black => BackgroundSource::Black,
                        BackgroundMode::Image => {
                            BackgroundSource::Image(resolve(path.as_ref().unwrap()))
                        }
                        BackgroundMode::Directory => BackgroundSource::Pool(
                            BackgroundPool::from_dir(&resolve(path.as_ref().unwrap()))?,
                        ),
                    };
                    PreparedEffect::Background {
                        source,
                        strict: *strict,
                    }
                }
                other => PreparedEffect::Other(other.clone()),
            };
            steps.push((step.probability, step.tag.clone(), prepared));
        }
        Ok(Self { steps })
    }

    /// Runs the pipeline on one frame. Each step draws one uniform and fires
    /// iff the draw is below its probability; a directory background then
    /// draws once more to pick its image.
    pub fn apply(&self, render: &RenderOutput, rng: &mut DeterministicRng) -> Result<Augmented> {
        let mut color = render.color.clone();
        let mut tags = Vec::new();
        for (probability, tag, effect) in &self.steps {
            if rng.uniform() >= *probability {
                continue;
            }
            color = match effect {
                PreparedEffect::Background { source, strict } => {
                    let (w, h) = (render.width(), render.height());
                    let bg = match source {
                        BackgroundSource::Black => Ok(black(w, h)),
                        BackgroundSource::Image(p) => load_background(p, w, h),
                        BackgroundSource::Pool(pool) => load_background(pool.pick(rng), w, h),
                    };
                    let bg = match bg {
                        Ok(bg) => bg,
                        Err(e) if *strict => return Err(e),
                        Err(e) => {
                            log::warn!("background unavailable, using black: {e}");
                            black(w, h)
                        }
                    };
                    composite_background(&color, &render.mask, &bg)
                }
                PreparedEffect::Other(effect) => apply_effect(&color, effect),
            };
            if let Some(t) = tag {
                tags.push(t.clone());
            }
        }
        Ok(Augmented { color, tags })
    }
}

fn apply_effect(img: &RgbImage, effect: &Effect) -> RgbImage {
    match *effect {
        Effect::GaussianBlur { sigma } => gaussian_blur(img, sigma),
        Effect::Bloom {
            threshold,
            radius,
            gain,
        } => bloom(img, threshold, radius, gain),
        Effect::Star {
            threshold,
            num_streaks,
            length,
            gain,
        } => star(img, threshold, num_streaks, length, gain),
        Effect::Exposure { scale } => exposure(img, scale),
        Effect::Background { .. } => unreachable!("backgrounds are prepared separately"),
    }
}

/// Loads an image and rescales it (bilinear) to `width × height`.
pub fn load_background(path: &Path, width: u32, height: u32) -> Result<RgbImage> {
    let img = image::open(path)?.to_rgb8();
    if img.dimensions() == (width, height) {
        return Ok(img);
    }
    Ok(image::imageops::resize(&img, width, height, FilterType::Triangle))
}

/// Convenience wrapper: prepares `spec` relative to the working directory and applies it.
pub fn apply_pipeline(
    render: &RenderOutput,
    spec: &AugmentationSpec,
    rng: &mut DeterministicRng,
) -> Result<Augmented> {
    Compositor::new(spec, Path::new("."))?.apply(render, rng)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use image::Rgb;

    use super::*;
    use crate::geometry::{resolve_scene, CameraIntrinsics, ScenePose};
    use crate::render::{render, RenderSettings, TriangleMesh};

    fn frame() -> RenderOutput {
        let cam = CameraIntrinsics::new(48, 48, PI / 3.0).unwrap();
        let scene = resolve_scene(&ScenePose { distance: 4.0, ..Default::default() }, &cam).unwrap();
        render(&TriangleMesh::plate(1.0, 1.0).with_albedo([1.0, 1.0, 1.0]), &scene, &cam, &RenderSettings::default()).unwrap()
    }

    fn every_effect(p: f64, identity: bool) -> AugmentationSpec {
        let g = if identity { 0.0 } else { 0.8 };
        AugmentationSpec {
            steps: vec![
                AugmentationStep::new(Effect::Background { mode: BackgroundMode::Black, path: None, strict: false }, p),
                AugmentationStep::new(Effect::GaussianBlur { sigma: if identity { 0.0 } else { 1.2 } }, p),
                AugmentationStep::new(Effect::Bloom { threshold: 0.5, radius: 3.0, gain: g }, p),
                AugmentationStep::new(Effect::Star { threshold: 0.5, num_streaks: 4, length: 6, gain: g }, p),
                AugmentationStep::new(Effect::Exposure { scale: if identity { 1.0 } else { 1.3 } }, p),
            ],
        }
    }

    #[test]
    fn zero_probability_returns_render_color() {
        let f = frame();
        let mut rng = DeterministicRng::augment_stream(1, 0);
        let out = apply_pipeline(&f, &every_effect(0.0, false), &mut rng).unwrap();
        assert_eq!(out.color, f.color);
        assert!(out.tags.is_empty());
    }

    #[test]
    fn identity_parameters_return_render_color() {
        let f = frame();
        let mut rng = DeterministicRng::augment_stream(1, 0);
        let out = apply_pipeline(&f, &every_effect(1.0, true), &mut rng).unwrap();
        assert_eq!(out.color, f.color);
    }

    #[test]
    fn replay_is_byte_identical() {
        let f = frame();
        let spec = every_effect(0.5, false);
        let run = || {
            (0..20)
                .map(|i| apply_pipeline(&f, &spec, &mut DeterministicRng::augment_stream(77, i)).unwrap().color)
                .collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        // Mixed probabilities actually produce different frames.
        assert!(a.iter().any(|c| *c != a[0]));
    }

    #[test]
    fn directory_background_and_tags() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("b.png", 50u8), ("a.png", 120u8)] {
            RgbImage::from_pixel(10, 10, Rgb([v, v, v])).save(dir.path().join(name)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let pool = BackgroundPool::from_dir(dir.path()).unwrap();
        assert_eq!(pool.files.len(), 2);
        assert!(pool.files[0].ends_with("a.png"));

        let spec = AugmentationSpec {
            steps: vec![AugmentationStep::new(
                Effect::Background { mode: BackgroundMode::Directory, path: Some(dir.path().to_path_buf()), strict: true },
                1.0,
            )
            .tagged("earth")],
        };
        let f = frame();
        let out = apply_pipeline(&f, &spec, &mut DeterministicRng::augment_stream(3, 0)).unwrap();
        assert_eq!(out.tags, vec!["earth".to_string()]);
        let corner = out.color.get_pixel(0, 0).0[0];
        assert!(corner == 50 || corner == 120);
        // Target pixels keep their rendered color.
        assert_eq!(out.color.get_pixel(24, 24), f.color.get_pixel(24, 24));
    }

    #[test]
    fn unreadable_background_falls_back_or_fails() {
        let dir = tempfile::tempdir().unwrap();
        let bogus = dir.path().join("broken.png");
        std::fs::write(&bogus, b"not a png").unwrap();
        let spec = |strict| AugmentationSpec {
            steps: vec![AugmentationStep::new(
                Effect::Background { mode: BackgroundMode::Image, path: Some(bogus.clone()), strict },
                1.0,
            )],
        };
        let f = frame();
        let lenient = apply_pipeline(&f, &spec(false), &mut DeterministicRng::augment_stream(0, 0)).unwrap();
        assert_eq!(lenient.color, f.color);
        assert!(apply_pipeline(&f, &spec(true), &mut DeterministicRng::augment_stream(0, 0)).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = [
            AugmentationStep::new(Effect::GaussianBlur { sigma: -1.0 }, 1.0),
            AugmentationStep::new(Effect::Exposure { scale: 0.0 }, 1.0),
            AugmentationStep::new(Effect::Star { threshold: 0.5, num_streaks: 1, length: 4, gain: 1.0 }, 1.0),
            AugmentationStep::new(Effect::Bloom { threshold: 1.5, radius: 1.0, gain: 1.0 }, 1.0),
            AugmentationStep::new(Effect::Exposure { scale: 1.0 }, 1.5),
            AugmentationStep::new(Effect::Background { mode: BackgroundMode::Image, path: None, strict: false }, 1.0),
        ];
        for step in bad {
            assert!(AugmentationSpec { steps: vec![step] }.validate().is_err());
        }
    }

    #[test]
    fn yaml_step_form() {
        let spec: AugmentationSpec = serde_yaml::from_str(
            "steps:\n  - {kind: bloom, probability: 0.5, threshold: 0.8, radius: 4, gain: 0.6, tag: glow}\n  - {kind: background, mode: black}\n",
        )
        .unwrap();
        assert_eq!(spec.steps.len(), 2);
        assert_eq!(spec.steps[1].probability, 1.0);
        assert!(serde_yaml::from_str::<AugmentationSpec>("steps:\n  - {kind: bloom, threshold: 0.8, radius: 4, gain: 0.6, gian: 1}\n").is_err());
    }
}
