use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositor::{AugmentationSpec, Compositor};
use crate::error::{Error, Result};
use crate::geometry::{resolve_scene, CameraIntrinsics, Vec3};
use crate::imageset::{
    git_commit_of, Clock, FrameOutput, FrameRecord, ImagesetManifest, ImagesetWriter, ManifestFields,
};
use crate::render::{derive_labels, load_mesh, render, RenderSettings, TriangleMesh};
use crate::sequences::{DeterministicRng, ParameterRanges, SequenceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    pub vertical_fov_deg: f64,
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.width, self.height, self.vertical_fov_deg.to_radians())
    }
}

fn one() -> usize {
    1
}

/// Imageset generation config (YAML). Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub imageset_name: String,
    pub author: String,
    pub mesh: PathBuf,
    pub camera: CameraConfig,
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub ranges: ParameterRanges,
    #[serde(default)]
    pub augmentations: AugmentationSpec,
    /// Tags attached to every frame.
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub upload: bool,
    #[serde(default = "one")]
    pub workers: usize,
    /// Model-frame points projected into each frame's labels.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keypoints: Vec<Vec3>,
    /// Overrides the mesh albedo, RGB in `[0, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub albedo: Option<[f64; 3]>,
    /// Ambient light fraction; 0.08 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<f64>,
}

impl GenerationConfig {
    pub fn from_yaml(text: &str) -> Result<Self> {
        serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_yaml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not need the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for t in &self.tags {
            if t.is_empty() || t.contains(',') {
                return Err(Error::Config(format!("tag '{t}' must be non-empty without commas")));
            }
        }
        if let Some(a) = self.albedo {
            if !a.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(Error::Config(format!("albedo {a:?} outside [0, 1]")));
            }
        }
        if let Some(a) = self.ambient {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("ambient {a} outside [0, 1]")));
            }
        }
        if self.keypoints.iter().any(|k| !k.is_finite()) {
            return Err(Error::Config("keypoints must be finite".into()));
        }
        self.camera.intrinsics()?;
        self.ranges.validate()?;
        self.sequence.validate()?;
        self.augmentations.validate()
    }
}

/// Progress callback: `(frames done, total, frame id)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize, &str) + Sync);

pub struct GenerateOptions<'a> {
    /// Directory receiving `{imageset_name}/`.
    pub out_root: PathBuf,
    pub overwrite: bool,
    pub clock: Clock,
    /// Replaces the configured worker count when set.
    pub workers: Option<usize>,
    pub progress: Option<Progress<'a>>,
}

impl GenerateOptions<'_> {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        Self {
            out_root: out_root.into(),
            overwrite: false,
            clock: Clock::System,
            workers: None,
            progress: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOutcome {
    pub manifest: ImagesetManifest,
    pub dir: PathBuf,
    /// Frames whose mask came out empty.
    pub frames_without_target: usize,
}

/// Everything needed to render, checked up front.
struct Prepared {
    mesh: TriangleMesh,
    cam: CameraIntrinsics,
    poses: Vec<crate::geometry::ScenePose>,
    compositor: Compositor,
    settings: RenderSettings,
}

fn prepare(cfg: &GenerationConfig, base_dir: &Path) -> Result<Prepared> {
    cfg.validate()?;
    let mut mesh = load_mesh(base_dir.join(&cfg.mesh))?;
    if let Some(a) = cfg.albedo {
        mesh = mesh.with_albedo(a);
    }
    let settings = RenderSettings {
        ambient: cfg.ambient.unwrap_or(RenderSettings::default().ambient),
        ..Default::default()
    };
    Ok(Prepared {
        mesh,
        cam: cfg.camera.intrinsics()?,
        poses: cfg.sequence.poses(&cfg.ranges)?,
        compositor: Compositor::new(&cfg.augmentations, base_dir)?,
        settings,
    })
}

/// Renders, augments, labels and writes one frame.
fn produce_frame(p: &Prepared, cfg: &GenerationConfig, clock: Clock, index: usize) -> Result<FrameOutput> {
    let pose = p.poses[index];
    let scene = resolve_scene(&pose, &p.cam)?;
    let out = render(&p.mesh, &scene, &p.cam, &p.settings)?;
    let labels = derive_labels(&out, &scene, &p.cam, &cfg.keypoints);
    let mut rng = DeterministicRng::augment_stream(cfg.sequence.seed, index as u64);
    let augmented = p.compositor.apply(&out, &mut rng)?;
    let tags: BTreeSet<String> = cfg.tags.iter().cloned().chain(augmented.tags).collect();
    let record = FrameRecord::new(&cfg.sequence.name, index as u64, tags, clock.now(), pose, labels);
    Ok(FrameOutput {
        record,
        color: augmented.color,
        mask: out.mask,
        depth: out.depth,
    })
}

/// Samples or interpolates poses, renders, augments and writes an imageset.
pub fn generate_imageset(
    cfg: &GenerationConfig,
    base_dir: &Path,
    opts: &GenerateOptions<'_>,
) -> Result<GenerateOutcome> {
    let prepared = prepare(cfg, base_dir)?;
    let workers = opts.workers.unwrap_or(cfg.workers).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let writer = ImagesetWriter::create(&opts.out_root, &cfg.imageset_name, opts.overwrite)?;
    let total = prepared.poses.len();
    let done = AtomicUsize::new(0);
    let records: Vec<FrameRecord> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|i| {
                let frame = produce_frame(&prepared, cfg, opts.clock, i)?;
                writer.write_frame(&frame)?;
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(progress) = opts.progress {
                    progress(n, total, &frame.record.frame_id);
                }
                Ok(frame.record)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let frames_without_target = records.iter().filter(|r| !r.labels.target_visible()).count();
    let dir = writer.dir().to_path_buf();
    let manifest = writer.commit(
        &records,
        ManifestFields {
            name: cfg.imageset_name.clone(),
            author: cfg.author.clone(),
            created: opts.clock.now(),
            git_commit: git_commit_of(base_dir),
            seed: cfg.sequence.seed,
        },
    )?;
    Ok(GenerateOutcome {
        manifest,
        dir,
        frames_without_target,
    })
}
