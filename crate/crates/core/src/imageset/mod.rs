//! Imageset layout: one JSON record plus image, mask and depth files per
//! frame, and a set-wide manifest written last as the commit point.
//!
//! ```text
//! {root}/{name}/meta_{frame_id}.json
//! {root}/{name}/image_{frame_id}.png
//! {root}/{name}/mask_{frame_id}.png
//! {root}/{name}/depth_{frame_id}.bin
//! {root}/{name}/imageset_metadata.json
//! ```

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use image::{GrayImage, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScenePose;
use crate::render::{DepthMap, LabelSet};
use crate::storage::{self, BucketRole, ObjectKey, ObjectStore};

pub const MANIFEST_FILE: &str = "imageset_metadata.json";
/// Present while a set is being written, and left behind when a write fails.
pub const INCOMPLETE_MARKER: &str = ".incomplete";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializes timestamps as RFC 3339 with a `Z` suffix and whole seconds
/// unless sub-second precision is present.
mod iso8601 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame_id: String,
    pub image: String,
    pub mask: String,
    pub depth: String,
    pub tags: BTreeSet<String>,
    pub sequence_name: String,
    pub frame_index: u64,
    #[serde(with = "iso8601")]
    pub timestamp: DateTime<Utc>,
    pub pose: ScenePose,
    pub labels: LabelSet,
}

pub fn frame_id(sequence: &str, index: u64) -> String {
    format!("{sequence}_{index:06}")
}

impl FrameRecord {
    /// Record with the standard file names for `frame_id(sequence, index)`.
    pub fn new(
        sequence: &str,
        index: u64,
        tags: BTreeSet<String>,
        timestamp: DateTime<Utc>,
        pose: ScenePose,
        labels: LabelSet,
    ) -> Self {
        let id = frame_id(sequence, index);
        Self {
            image: format!("image_{id}.png"),
            mask: format!("mask_{id}.png"),
            depth: format!("depth_{id}.bin"),
            frame_id: id,
            tags,
            sequence_name: sequence.to_string(),
            frame_index: index,
            timestamp,
            pose,
            labels,
        }
    }

    pub fn meta_file(&self) -> String {
        meta_file(&self.frame_id)
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let id = &self.frame_id;
        if id.is_empty() || id.contains('/') {
            out.push(format!("frame id '{id}' is empty or contains '/'"));
        }
        for t in &self.tags {
            if t.is_empty() || t.contains(',') {
                out.push(format!("{id}: tag '{t}' must be non-empty without commas"));
            }
        }
        for f in [&self.image, &self.mask, &self.depth] {
            if f.is_empty() || f.contains('/') || f == MANIFEST_FILE {
                out.push(format!("{id}: invalid file name '{f}'"));
            }
        }
        out
    }
}

pub fn meta_file(frame_id: &str) -> String {
    format!("meta_{frame_id}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagesetManifest {
    pub name: String,
    pub author: String,
    #[serde(with = "iso8601")]
    pub created: DateTime<Utc>,
    pub git_commit: String,
    pub frame_count: u64,
    pub tag_vocabulary: Vec<String>,
    pub seed: u64,
    pub tool_version: String,
}

impl ImagesetManifest {
    fn problems(&self, records: &[FrameRecord]) -> Vec<String> {
        let mut out = Vec::new();
        if self.frame_count != records.len() as u64 {
            out.push(format!(
                "manifest frame_count {} but {} frame records present",
                self.frame_count,
                records.len()
            ));
        }
        let vocab = tag_vocabulary(records);
        if self.tag_vocabulary != vocab {
            out.push(format!(
                "manifest tag_vocabulary {:?} differs from frame tags {:?}",
                self.tag_vocabulary, vocab
            ));
        }
        let commit_ok = self.git_commit == "unknown"
            || (self.git_commit.len() == 40 && self.git_commit.chars().all(|c| c.is_ascii_hexdigit()));
        if !commit_ok {
            out.push(format!("git_commit '{}' is neither 40 hex digits nor 'unknown'", self.git_commit));
        }
        let mut seen = HashSet::new();
        for r in records {
            if !seen.insert(r.frame_id.as_str()) {
                out.push(format!("duplicate frame id '{}'", r.frame_id));
            }
        }
        out
    }
}

/// Sorted union of all frame tags.
pub fn tag_vocabulary(records: &[FrameRecord]) -> Vec<String> {
    records
        .iter()
        .flat_map(|r| r.tags.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Set-level fields supplied by the caller; counts and vocabulary are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestFields {
    pub name: String,
    pub author: String,
    pub created: DateTime<Utc>,
    pub git_commit: String,
    pub seed: u64,
}

/// Source of timestamps; `Fixed` makes output reproducible byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }

    /// 2000-01-01T00:00:00Z.
    pub fn fixed_epoch() -> Self {
        Clock::Fixed(DateTime::<Utc>::from_timestamp(946_684_800, 0).expect("valid timestamp"))
    }
}

/// Commit hash of the checkout enclosing `dir`, or `"unknown"`.
pub fn git_commit_of(dir: &Path) -> String {
    let out = std::process::Command::new("git")
        .arg("rev-parse")
        .arg("HEAD")
        .current_dir(dir)
        .stderr(std::process::Stdio::null())
        .output();
    match out {
        Ok(o) if o.status.success() => {
            let s = String::from_utf8_lossy(&o.stdout).trim().to_string();
            if s.len() == 40 && s.chars().all(|c| c.is_ascii_hexdigit()) {
                s
            } else {
                "unknown".into()
            }
        }
        _ => "unknown".into(),
    }
}

/// Raster outputs and record of one frame, ready to be written.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub record: FrameRecord,
    pub color: RgbImage,
    pub mask: GrayImage,
    pub depth: DepthMap,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn encode_png<I: image::ImageEncoder>(
    encoder: I,
    data: &[u8],
    w: u32,
    h: u32,
    color: image::ExtendedColorType,
) -> Result<()> {
    encoder.write_image(data, w, h, color)?;
    Ok(())
}

/// PNG bytes of an 8-bit RGB raster.
pub fn png_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    encode_png(
        image::codecs::png::PngEncoder::new(&mut buf),
        img.as_raw(),
        img.width(),
        img.height(),
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(buf)
}

/// PNG bytes of an 8-bit grayscale raster.
pub fn png_gray(img: &GrayImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    encode_png(
        image::codecs::png::PngEncoder::new(&mut buf),
        img.as_raw(),
        img.width(),
        img.height(),
        image::ExtendedColorType::L8,
    )?;
    Ok(buf)
}

/// Streaming writer for one imageset directory.
///
/// Frames may be written from several threads; [`ImagesetWriter::commit`]
/// validates the records and writes the manifest last.
#[derive(Debug)]
pub struct ImagesetWriter {
    dir: PathBuf,
}

impl ImagesetWriter {
    /// Prepares `{root}/{name}`. An existing non-empty directory is refused
    /// unless `overwrite`, in which case it is cleared.
    pub fn create(root: &Path, name: &str, overwrite: bool) -> Result<Self> {
        validate_name(name)?;
        let dir = root.join(name);
        let non_empty = dir
            .read_dir()
            .map(|mut d| d.next().is_some())
            .unwrap_or(false);
        if non_empty {
            if !overwrite {
                return Err(Error::AlreadyExists(dir));
            }
            std::fs::remove_dir_all(&dir)
                .map_err(|e| Error::io(format!("clearing {}", dir.display()), e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        write_file(&dir.join(INCOMPLETE_MARKER), b"")?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_frame(&self, frame: &FrameOutput) -> Result<()> {
        let r = &frame.record;
        let problems = r.problems();
        if !problems.is_empty() {
            return Err(Error::InvalidParameter(problems.join("; ")));
        }
        write_file(&self.dir.join(&r.image), &png_rgb(&frame.color)?)?;
        write_file(&self.dir.join(&r.mask), &png_gray(&frame.mask)?)?;
        write_file(&self.dir.join(&r.depth), &frame.depth.to_bytes())?;
        write_file(&self.dir.join(r.meta_file()), &to_json(r)?)
    }

    /// Validates, writes the manifest and clears the incomplete marker.
    pub fn commit(self, records: &[FrameRecord], fields: ManifestFields) -> Result<ImagesetManifest> {
        let mut sorted: Vec<FrameRecord> = records.to_vec();
        sorted.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
        let manifest = ImagesetManifest {
            name: fields.name,
            author: fields.author,
            created: fields.created,
            git_commit: fields.git_commit,
            frame_count: sorted.len() as u64,
            tag_vocabulary: tag_vocabulary(&sorted),
            seed: fields.seed,
            tool_version: TOOL_VERSION.to_string(),
        };
        let mut problems = manifest.problems(&sorted);
        for r in &sorted {
            for f in [r.image.clone(), r.mask.clone(), r.depth.clone(), r.meta_file()] {
                if !self.dir.join(&f).is_file() {
                    problems.push(format!("{}: file {f} was not written", r.frame_id));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidImageset {
                name: manifest.name,
                problems,
            });
        }
        write_file(&self.dir.join(MANIFEST_FILE), &to_json(&manifest)?)?;
        let marker = self.dir.join(INCOMPLETE_MARKER);
        std::fs::remove_file(&marker).map_err(|e| Error::io(format!("removing {}", marker.display()), e))?;
        Ok(manifest)
    }
}

fn validate_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "invalid name '{name}': use letters, digits, '-', '_' or '.'"
        )))
    }
}

/// Writes a complete imageset in one call, frames in parallel.
pub fn write_imageset(
    frames: &[FrameOutput],
    fields: ManifestFields,
    root: &Path,
    overwrite: bool,
) -> Result<ImagesetManifest> {
    let writer = ImagesetWriter::create(root, &fields.name, overwrite)?;
    frames.par_iter().try_for_each(|f| writer.write_frame(f))?;
    let records: Vec<FrameRecord> = frames.iter().map(|f| f.record.clone()).collect();
    writer.commit(&records, fields)
}

/// Where imagesets are read from: a local root directory or an object store.
#[derive(Clone, Copy)]
pub enum ImagesetSource<'a> {
    Dir(&'a Path),
    Store(&'a dyn ObjectStore),
}

impl std::fmt::Debug for ImagesetSource<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImagesetSource::Dir(p) => write!(f, "Dir({})", p.display()),
            ImagesetSource::Store(s) => write!(f, "Store({})", s.describe()),
        }
    }
}

impl ImagesetSource<'_> {
    /// File names in the imageset; `None` when the set does not exist.
    fn files(&self, name: &str) -> Result<Option<Vec<String>>> {
        match self {
            ImagesetSource::Dir(root) => {
                let dir = root.join(name);
                if !dir.is_dir() {
                    return Ok(None);
                }
                Ok(Some(storage::files_under(&dir)?))
            }
            ImagesetSource::Store(store) => {
                let prefix = format!("{name}/");
                let keys = store.list(BucketRole::Imagesets, &prefix)?;
                Ok(Some(keys.into_iter().map(|k| k[prefix.len()..].to_string()).collect()))
            }
        }
    }

    /// Bytes of one file of an imageset.
    pub fn read(&self, name: &str, file: &str) -> Result<Vec<u8>> {
        match self {
            ImagesetSource::Dir(root) => {
                let path = root.join(name).join(file);
                std::fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
            }
            ImagesetSource::Store(store) => {
                store.get(&ObjectKey::new(BucketRole::Imagesets, format!("{name}/{file}"))?)
            }
        }
    }

    /// Loads and validates an imageset; records come back in frame id order.
    pub fn load(&self, name: &str) -> Result<(ImagesetManifest, Vec<FrameRecord>)> {
        validate_name(name)?;
        let files = self.files(name)?.unwrap_or_default();
        if !files.iter().any(|f| f == MANIFEST_FILE) || files.iter().any(|f| f == INCOMPLETE_MARKER) {
            return Err(Error::NotAnImageset(name.to_string()));
        }
        let manifest: ImagesetManifest = serde_json::from_slice(&self.read(name, MANIFEST_FILE)?)
            .map_err(|e| Error::InvalidImageset {
                name: name.to_string(),
                problems: vec![format!("{MANIFEST_FILE}: {e}")],
            })?;
        let present: HashSet<&str> = files.iter().map(String::as_str).collect();
        let mut problems = Vec::new();
        if manifest.name != name {
            problems.push(format!("manifest name '{}' does not match '{name}'", manifest.name));
        }
        let meta_files: Vec<&String> = files
            .iter()
            .filter(|f| f.starts_with("meta_") && f.ends_with(".json") && !f.contains('/'))
            .collect();
        let parsed: Vec<Result<FrameRecord, String>> = meta_files
            .par_iter()
            .map(|f| {
                let bytes = self.read(name, f).map_err(|e| format!("{f}: {e}"))?;
                let rec: FrameRecord = serde_json::from_slice(&bytes).map_err(|e| format!("{f}: {e}"))?;
                if **f != rec.meta_file() {
                    return Err(format!("{f}: holds frame id '{}'", rec.frame_id));
                }
                Ok(rec)
            })
            .collect();
        let mut records = Vec::with_capacity(parsed.len());
        for p in parsed {
            match p {
                Ok(r) => records.push(r),
                Err(e) => problems.push(e),
            }
        }
        records.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
        for r in &records {
            problems.extend(r.problems());
            for f in [&r.image, &r.mask, &r.depth] {
                if !present.contains(f.as_str()) {
                    problems.push(format!("{}: referenced file {f} is missing", r.frame_id));
                }
            }
        }
        problems.extend(manifest.problems(&records));
        if !problems.is_empty() {
            return Err(Error::InvalidImageset {
                name: name.to_string(),
                problems,
            });
        }
        Ok((manifest, records))
    }

    /// Names of committed imagesets (those with a manifest), sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        match self {
            ImagesetSource::Dir(root) => {
                let mut names = Vec::new();
                let Ok(entries) = std::fs::read_dir(root) else {
                    return Ok(names);
                };
                for e in entries.flatten() {
                    let p = e.path();
                    if p.join(MANIFEST_FILE).is_file() && !p.join(INCOMPLETE_MARKER).exists() {
                        names.push(e.file_name().to_string_lossy().into_owned());
                    }
                }
                names.sort();
                Ok(names)
            }
            ImagesetSource::Store(store) => {
                let keys = store.list(BucketRole::Imagesets, "")?;
                let mut names: Vec<String> = keys
                    .iter()
                    .filter_map(|k| k.strip_suffix(&format!("/{MANIFEST_FILE}")))
                    .filter(|n| !n.contains('/'))
                    .map(str::to_string)
                    .collect();
                names.sort();
                Ok(names)
            }
        }
    }
}

/// Uploads a committed local imageset; the manifest goes last.
pub fn upload_imageset(root: &Path, name: &str, store: &dyn ObjectStore) -> Result<Vec<String>> {
    ImagesetSource::Dir(root).load(name)?;
    storage::upload_dir(store, BucketRole::Imagesets, name, &root.join(name), &[MANIFEST_FILE])
}

/// Downloads an imageset into `{root}/{name}` and validates the local copy.
pub fn download_imageset(
    store: &dyn ObjectStore,
    name: &str,
    root: &Path,
    overwrite: bool,
) -> Result<ImagesetManifest> {
    validate_name(name)?;
    ImagesetSource::Store(store).load(name)?;
    let dir = root.join(name);
    if dir.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false) {
        if !overwrite {
            return Err(Error::AlreadyExists(dir));
        }
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(format!("clearing {}", dir.display()), e))?;
    }
    storage::download_prefix(store, BucketRole::Imagesets, name, &dir)?;
    Ok(ImagesetSource::Dir(root).load(name)?.0)
}

/// RFC 3339 text for a timestamp as stored in records.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}
