//! Dataset creation: load imagesets, filter by size and tag, split, convert,
//! collect metadata, write and optionally upload.

mod select;

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use select::{check_partition, filter_by_tags, split, test_count, Splits, TagFilter, TagMode};

use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::imageset::{FrameRecord, ImagesetManifest, ImagesetSource, TOOL_VERSION};
use crate::render::CameraPose;
use crate::sequences::{DeterministicRng, CURATION_CAP_STREAM};
use crate::storage::{self, BucketRole, ObjectStore};

pub const INDEX_FILE: &str = "index.jsonl";
/// Evaluation ground truth for every dataset image, keyed by image path.
pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";
pub const DATASET_METADATA_FILE: &str = "dataset_metadata.json";
pub const SPLITS_DIR: &str = "splits";
const INCOMPLETE_MARKER: &str = ".incomplete";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetAuthorship {
    pub created_by: String,
    #[serde(default)]
    pub comments: String,
}

fn default_test_percent() -> f64 {
    0.2
}

fn empty_map() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

/// Dataset creation config. Field names follow the dataset YAML exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationConfig {
    pub dataset_name: String,
    /// Read imagesets from a local directory rather than the imagesets bucket.
    #[serde(default)]
    pub local: bool,
    pub imageset: Vec<String>,
    #[serde(default)]
    pub overwrite_local: bool,
    #[serde(default)]
    pub kfolds: u32,
    #[serde(default = "default_test_percent")]
    pub test_percent: f64,
    #[serde(default)]
    pub upload: bool,
    #[serde(default)]
    pub delete_local: bool,
    pub metadata: DatasetAuthorship,
    /// Opaque options handed to the transform stage.
    #[serde(default = "empty_map")]
    pub plugin: serde_json::Value,
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.dataset_name.is_empty()
            || self.dataset_name.starts_with('.')
            || !self
                .dataset_name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return cfg(format!("invalid dataset_name '{}'", self.dataset_name));
        }
        if self.imageset.is_empty() {
            return cfg("at least one imageset is required".into());
        }
        let mut seen = HashSet::new();
        for s in &self.imageset {
            if !seen.insert(s) {
                return cfg(format!("imageset '{s}' listed twice"));
            }
        }
        if !(0.0..1.0).contains(&self.test_percent) {
            return cfg(format!("test_percent {} outside [0, 1)", self.test_percent));
        }
        if self.delete_local && !self.upload {
            return cfg("delete_local requires upload".into());
        }
        if !self.plugin.is_object() {
            return cfg("plugin must be a mapping".into());
        }
        Ok(())
    }
}

/// Size and tag filtering plus the seed for all curation shuffles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPlan {
    /// Keeps the first N frames (frame id order) of the named imagesets.
    #[serde(default)]
    pub size_caps: std::collections::BTreeMap<String, usize>,
    #[serde(default)]
    pub tag_filters: Vec<TagFilter>,
    /// Keeps N frames of the merged pool, chosen by a seeded shuffle.
    #[serde(default)]
    pub final_cap: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl FilterPlan {
    pub fn validate(&self, config: &CurationConfig) -> Result<()> {
        for name in self.size_caps.keys() {
            if !config.imageset.contains(name) {
                return Err(Error::Config(format!("size cap for unlisted imageset '{name}'")));
            }
        }
        if self.tag_filters.iter().any(|f| f.tags.is_empty()) {
            return Err(Error::Config("tag filters need at least one tag".into()));
        }
        Ok(())
    }
}

/// A frame chosen for the dataset, with the imageset it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub imageset: String,
    pub record: FrameRecord,
}

impl Candidate {
    /// Identity across imagesets: `{imageset}/{frame_id}`.
    pub fn qualified_id(&self) -> String {
        format!("{}/{}", self.imageset, self.record.frame_id)
    }

    /// Path of the copied image inside the dataset.
    pub fn dataset_image(&self) -> String {
        format!("images/{}/{}", self.imageset, self.record.image)
    }
}

/// Applies size caps, tag filters and the final cap, in that order.
/// Candidates must be grouped by imageset in config order, frame id order within.
pub fn select(candidates: Vec<Candidate>, plan: &FilterPlan) -> Vec<Candidate> {
    let mut taken: std::collections::HashMap<&str, usize> = Default::default();
    let mut capped = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let n = taken.entry(c.imageset.as_str()).or_default();
        if plan.size_caps.get(&c.imageset).is_none_or(|cap| *n < *cap) {
            *n += 1;
            capped.push(c);
        }
    }
    let tags: Vec<&BTreeSet<String>> = capped.iter().map(|c| &c.record.tags).collect();
    let mut chosen = filter_by_tags(&tags, &plan.tag_filters);
    if let Some(cap) = plan.final_cap {
        if cap < chosen.len() {
            chosen.shuffle(&mut DeterministicRng::for_stream(plan.seed, CURATION_CAP_STREAM));
            chosen.truncate(cap);
            chosen.sort_unstable();
        }
    }
    chosen.into_iter().map(|i| capped[i].clone()).collect()
}

/// One line of `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexRecord {
    pub image: String,
    /// Inclusive pixel box `[xmin, ymin, xmax, ymax]`, absent when the target is not visible.
    pub bbox: Option<[u32; 4]>,
    pub pose: CameraPose,
    pub tags: BTreeSet<String>,
    pub source_imageset: String,
    pub source_frame_id: String,
}

impl IndexRecord {
    pub fn from_candidate(c: &Candidate) -> Self {
        Self {
            image: c.dataset_image(),
            bbox: c.record.labels.bbox,
            pose: c.record.labels.pose_camera,
            tags: c.record.tags.clone(),
            source_imageset: c.imageset.clone(),
            source_frame_id: c.record.frame_id.clone(),
        }
    }

    /// Evaluation record for this image, keyed by its dataset path.
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_pixel_box(&self.image, self.bbox)
    }
}

/// Everything a transform needs to lay out the dataset.
pub struct TransformInput<'a> {
    pub source: ImagesetSource<'a>,
    pub selection: &'a [Candidate],
    pub splits: &'a Splits,
    pub plugin: &'a serde_json::Value,
}

/// Conversion to a training format. Replace to target a specific framework.
pub trait DatasetTransform: Sync {
    fn write(&self, input: &TransformInput<'_>, out_dir: &Path) -> Result<()>;
}

/// Copies images and writes a JSON-lines index plus one file per split,
/// each listing image paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct CopyImagesTransform;

impl DatasetTransform for CopyImagesTransform {
    fn write(&self, input: &TransformInput<'_>, out_dir: &Path) -> Result<()> {
        input.selection.par_iter().try_for_each(|c| {
            let bytes = input.source.read(&c.imageset, &c.record.image)?;
            let dst = out_dir.join(c.dataset_image());
            create_parent(&dst)?;
            write_file(&dst, &bytes)
        })?;
        let (mut index, mut truth) = (Vec::new(), Vec::new());
        for c in input.selection {
            let record = IndexRecord::from_candidate(c);
            serde_json::to_writer(&mut index, &record)?;
            index.push(b'\n');
            serde_json::to_writer(&mut truth, &record.ground_truth())?;
            truth.push(b'\n');
        }
        write_file(&out_dir.join(INDEX_FILE), &index)?;
        write_file(&out_dir.join(GROUND_TRUTH_FILE), &truth)?;
        let list = |ids: &[usize]| -> Vec<u8> {
            ids.iter()
                .map(|&i| format!("{}\n", input.selection[i].dataset_image()))
                .collect::<String>()
                .into_bytes()
        };
        let splits = out_dir.join(SPLITS_DIR);
        std::fs::create_dir_all(&splits).map_err(|e| Error::io(format!("creating {}", splits.display()), e))?;
        write_file(&splits.join("train.txt"), &list(&input.splits.train))?;
        write_file(&splits.join("test.txt"), &list(&input.splits.test))?;
        for (k, fold) in input.splits.folds.iter().enumerate() {
            write_file(&splits.join(format!("fold_{k}.txt")), &list(fold))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub selected: usize,
    pub train: usize,
    pub test: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub dataset_name: String,
    pub created_by: String,
    pub comments: String,
    pub created: DateTime<Utc>,
    pub git_commit: String,
    pub tool_version: String,
    pub config: CurationConfig,
    pub filter_plan: FilterPlan,
    pub sources: Vec<ImagesetManifest>,
    pub counts: DatasetCounts,
}

/// Run-time context of a curation: where things are read and written.
pub struct CurationContext<'a> {
    /// Root holding imagesets when `config.local` is set.
    pub local_imagesets: &'a Path,
    /// Object store for remote imagesets and dataset upload.
    pub store: Option<&'a dyn ObjectStore>,
    /// Local directory under which `{dataset_name}/` is written.
    pub output_root: &'a Path,
    pub created: DateTime<Utc>,
    pub git_commit: String,
    pub transform: &'a dyn DatasetTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetArtifact {
    pub name: String,
    /// Local copy; `None` once removed after upload.
    pub local_dir: Option<PathBuf>,
    pub selection: Vec<Candidate>,
    pub splits: Splits,
    pub metadata: DatasetMetadata,
    pub uploaded_keys: Vec<String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_parent(path: &Path) -> Result<()> {
    let parent = path.parent().expect("dataset files live in a directory");
    std::fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))
}

/// Loads every configured imageset as candidates, in config order.
pub fn load_candidates(
    config: &CurationConfig,
    source: ImagesetSource<'_>,
) -> Result<(Vec<ImagesetManifest>, Vec<Candidate>)> {
    let mut manifests = Vec::new();
    let mut candidates = Vec::new();
    for name in &config.imageset {
        let (manifest, records) = source.load(name)?;
        manifests.push(manifest);
        candidates.extend(records.into_iter().map(|record| Candidate {
            imageset: name.clone(),
            record,
        }));
    }
    Ok((manifests, candidates))
}

/// Runs the full curation.
pub fn curate(config: &CurationConfig, plan: &FilterPlan, ctx: &CurationContext<'_>) -> Result<DatasetArtifact> {
    config.validate()?;
    plan.validate(config)?;
    if (config.upload || !config.local) && ctx.store.is_none() {
        return Err(Error::Config("this configuration needs an object store".into()));
    }
    let out_dir = ctx.output_root.join(&config.dataset_name);
    let occupied = out_dir.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !config.overwrite_local {
        return Err(Error::AlreadyExists(out_dir));
    }

    let source = match (config.local, ctx.store) {
        (true, _) => ImagesetSource::Dir(ctx.local_imagesets),
        (false, Some(store)) => ImagesetSource::Store(store),
        (false, None) => unreachable!("checked above"),
    };
    let (manifests, candidates) = load_candidates(config, source)?;
    let selection = select(candidates, plan);
    if selection.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let splits = split(selection.len(), config.test_percent, config.kfolds, plan.seed)?;

    if occupied {
        std::fs::remove_dir_all(&out_dir).map_err(|e| Error::io(format!("clearing {}", out_dir.display()), e))?;
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    write_file(&out_dir.join(INCOMPLETE_MARKER), b"")?;
    ctx.transform.write(
        &TransformInput {
            source,
            selection: &selection,
            splits: &splits,
            plugin: &config.plugin,
        },
        &out_dir,
    )?;

    let metadata = DatasetMetadata {
        dataset_name: config.dataset_name.clone(),
        created_by: config.metadata.created_by.clone(),
        comments: config.metadata.comments.clone(),
        created: ctx.created,
        git_commit: ctx.git_commit.clone(),
        tool_version: TOOL_VERSION.to_string(),
        config: config.clone(),
        filter_plan: plan.clone(),
        sources: manifests,
        counts: DatasetCounts {
            selected: selection.len(),
            train: splits.train.len(),
            test: splits.test.len(),
            folds: splits.folds.iter().map(Vec::len).collect(),
        },
    };
    let mut meta_bytes = serde_json::to_vec_pretty(&metadata)?;
    meta_bytes.push(b'\n');
    write_file(&out_dir.join(DATASET_METADATA_FILE), &meta_bytes)?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    std::fs::remove_file(&marker).map_err(|e| Error::io(format!("removing {}", marker.display()), e))?;

    let mut uploaded_keys = Vec::new();
    let mut local_dir = Some(out_dir.clone());
    if config.upload {
        let store = ctx.store.expect("checked above");
        uploaded_keys = storage::upload_dir(
            store,
            BucketRole::Datasets,
            &config.dataset_name,
            &out_dir,
            &[DATASET_METADATA_FILE],
        )?;
        verify_upload(store, &config.dataset_name, &uploaded_keys)?;
        if config.delete_local {
            std::fs::remove_dir_all(&out_dir).map_err(|e| Error::io(format!("removing {}", out_dir.display()), e))?;
            local_dir = None;
        }
    }
    Ok(DatasetArtifact {
        name: config.dataset_name.clone(),
        local_dir,
        selection,
        splits,
        metadata,
        uploaded_keys,
    })
}

fn verify_upload(store: &dyn ObjectStore, name: &str, expected: &[String]) -> Result<()> {
    let listed: HashSet<String> = store
        .list(BucketRole::Datasets, &format!("{name}/"))?
        .into_iter()
        .collect();
    let missing: Vec<&String> = expected.iter().filter(|k| !listed.contains(*k)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Incomplete(format!(
            "{} dataset objects missing after upload, e.g. {}",
            missing.len(),
            missing[0]
        )))
    }
}

/// Reads `index.jsonl` back.
pub fn read_index(path: &Path) -> Result<Vec<IndexRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
