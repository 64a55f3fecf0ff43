//! Trained-model storage: each model gets a random 128-bit id appended to its
//! name, a metadata file with the same suffix, and an extras folder named by
//! the id.
//!
//! ```text
//! models/{name}_{id}{ext}
//! models/{name}_{id}.json
//! extras/{id}/{relative path}
//! ```

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::{self, BucketRole, ObjectKey, ObjectStore};

pub const MODELS_PREFIX: &str = "models/";
pub const EXTRAS_PREFIX: &str = "extras/";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub created_by: String,
    #[serde(default)]
    pub comments: String,
    pub dataset_name: String,
    pub timestamp: DateTime<Utc>,
    pub git_commit: String,
    /// Free-form options recorded alongside the model.
    #[serde(default)]
    pub plugin: serde_json::Value,
}

/// Stored entry, serialized as the metadata object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub model_name: String,
    pub unique_id: String,
    pub model_key: String,
    pub metadata_key: String,
    pub extras_prefix: String,
    /// Extras keys, relative to the models bucket.
    pub extras: Vec<String>,
    /// False when some upload failed part way.
    pub complete: bool,
    pub metadata: ModelMetadata,
}

/// 32 lowercase hex digits from a random u128.
pub fn new_model_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn is_model_id(s: &str) -> bool {
    s.len() == 32 && s.chars().all(|c| matches!(c, '0'..='9' | 'a'..='f'))
}

pub fn validate_model_name(name: &str) -> Result<()> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_'));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "invalid model name '{name}': use letters, digits, '-' or '_'"
        )))
    }
}

/// Everything from the first `.` of the file name, kept verbatim (`.tar.gz`).
fn model_extension(file: &Path) -> String {
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match name.find('.') {
        Some(i) if i > 0 => name[i..].to_string(),
        _ => String::new(),
    }
}

pub fn model_key(name: &str, id: &str, ext: &str) -> String {
    format!("{MODELS_PREFIX}{name}_{id}{ext}")
}

pub fn metadata_key(name: &str, id: &str) -> String {
    format!("{MODELS_PREFIX}{name}_{id}.json")
}

/// Metadata key recovered from a stored model file name alone.
pub fn metadata_key_for_file(file_name: &str) -> Option<String> {
    let base = file_name.rsplit('/').next()?;
    let stem = base.split('.').next()?;
    let (_, id) = stem.rsplit_once('_')?;
    is_model_id(id).then(|| format!("{MODELS_PREFIX}{stem}.json"))
}

fn put_json(store: &dyn ObjectStore, key: &str, entry: &ModelEntry) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(entry)?;
    bytes.push(b'\n');
    store.put(&ObjectKey::new(BucketRole::Models, key)?, &bytes)
}

fn id_in_use(store: &dyn ObjectStore, name: &str, id: &str) -> Result<bool> {
    Ok(store.exists(&ObjectKey::new(BucketRole::Models, metadata_key(name, id))?)?
        || !store.list(BucketRole::Models, &format!("{EXTRAS_PREFIX}{id}/"))?.is_empty()
        || store
            .list(BucketRole::Models, MODELS_PREFIX)?
            .iter()
            .any(|k| k.contains(&format!("_{id}"))))
}

/// Uploads a model file, its extras and metadata with a fresh id.
pub fn register(
    name: &str,
    model_file: &Path,
    extras_dir: Option<&Path>,
    metadata: ModelMetadata,
    store: &dyn ObjectStore,
) -> Result<ModelEntry> {
    register_with_ids(name, model_file, extras_dir, metadata, store, &mut new_model_id)
}

/// [`register`] with an injectable id source. A colliding id is regenerated
/// once; a second collision is an error.
pub fn register_with_ids(
    name: &str,
    model_file: &Path,
    extras_dir: Option<&Path>,
    metadata: ModelMetadata,
    store: &dyn ObjectStore,
    next_id: &mut dyn FnMut() -> String,
) -> Result<ModelEntry> {
    validate_model_name(name)?;
    let model_bytes = std::fs::read(model_file)
        .map_err(|e| Error::io(format!("reading model file {}", model_file.display()), e))?;
    let extras_files = match extras_dir {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(Error::io(
                    format!("reading extras directory {}", dir.display()),
                    std::io::Error::from(std::io::ErrorKind::NotFound),
                ));
            }
            storage::files_under(dir)?
        }
        None => Vec::new(),
    };

    let mut id = next_id();
    if id_in_use(store, name, &id)? {
        log::warn!("model id {id} already in use, regenerating");
        id = next_id();
        if id_in_use(store, name, &id)? {
            return Err(Error::IdCollision(id));
        }
    }
    if !is_model_id(&id) {
        return Err(Error::Internal(format!("generated model id '{id}' is not 32 hex digits")));
    }

    let mut entry = ModelEntry {
        model_name: name.to_string(),
        model_key: model_key(name, &id, &model_extension(model_file)),
        metadata_key: metadata_key(name, &id),
        extras_prefix: format!("{EXTRAS_PREFIX}{id}/"),
        unique_id: id,
        extras: Vec::new(),
        complete: false,
        metadata,
    };

    let upload = |entry: &mut ModelEntry| -> Result<()> {
        store.put(&ObjectKey::new(BucketRole::Models, entry.model_key.as_str())?, &model_bytes)?;
        let dir = extras_dir.unwrap_or(Path::new("."));
        for rel in &extras_files {
            let path = dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let key = format!("{}{rel}", entry.extras_prefix);
            store.put(&ObjectKey::new(BucketRole::Models, key.as_str())?, &bytes)?;
            entry.extras.push(key);
        }
        Ok(())
    };
    if let Err(e) = upload(&mut entry) {
        // Best effort: leave a record flagged incomplete.
        if let Err(meta_err) = put_json(store, &entry.metadata_key, &entry) {
            log::warn!("could not record incomplete model entry: {meta_err}");
        }
        return Err(Error::Incomplete(format!("model {}: {e}", entry.unique_id)));
    }
    entry.complete = true;
    put_json(store, &entry.metadata_key, &entry)?;
    Ok(entry)
}

fn metadata_keys(store: &dyn ObjectStore) -> Result<Vec<String>> {
    Ok(store
        .list(BucketRole::Models, MODELS_PREFIX)?
        .into_iter()
        .filter(|k| k.ends_with(".json") && !k[MODELS_PREFIX.len()..].contains('/'))
        .filter(|k| metadata_key_for_file(k).as_deref() == Some(k.as_str()))
        .collect())
}

/// Finds an entry by id.
pub fn lookup(id: &str, store: &dyn ObjectStore) -> Result<ModelEntry> {
    let suffix = format!("_{id}.json");
    let key = metadata_keys(store)?
        .into_iter()
        .find(|k| k.ends_with(&suffix))
        .ok_or_else(|| Error::NotFound(format!("model id {id}")))?;
    let bytes = store.get(&ObjectKey::new(BucketRole::Models, key)?)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// One row of a model listing; unreadable metadata is reported, not fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct ListedModel {
    pub metadata_key: String,
    pub entry: Option<ModelEntry>,
    pub parse_error: Option<String>,
}

/// All entries, newest first; unreadable ones follow in key order.
pub fn list_models(store: &dyn ObjectStore) -> Result<Vec<ListedModel>> {
    let mut rows = Vec::new();
    for key in metadata_keys(store)? {
        let bytes = store.get(&ObjectKey::new(BucketRole::Models, key.as_str())?)?;
        let row = match serde_json::from_slice::<ModelEntry>(&bytes) {
            Ok(entry) => ListedModel { metadata_key: key, entry: Some(entry), parse_error: None },
            Err(e) => ListedModel { metadata_key: key, entry: None, parse_error: Some(e.to_string()) },
        };
        rows.push(row);
    }
    rows.sort_by(|a, b| match (&a.entry, &b.entry) {
        (Some(x), Some(y)) => y
            .metadata
            .timestamp
            .cmp(&x.metadata.timestamp)
            .then_with(|| a.metadata_key.cmp(&b.metadata_key)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.metadata_key.cmp(&b.metadata_key),
    });
    Ok(rows)
}

/// Downloads a model, its metadata and extras into `dir`; returns the model file path.
pub fn download_model(id: &str, store: &dyn ObjectStore, dir: &Path) -> Result<PathBuf> {
    let entry = lookup(id, store)?;
    let save = |key: &str, rel: &str| -> Result<PathBuf> {
        let bytes = store.get(&ObjectKey::new(BucketRole::Models, key)?)?;
        let path = dir.join(rel);
        let parent = path.parent().expect("joined path has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        std::fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    };
    let model = save(&entry.model_key, &entry.model_key)?;
    save(&entry.metadata_key, &entry.metadata_key)?;
    for k in &entry.extras {
        save(k, k)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use chrono::TimeZone;

    use super::*;
    use crate::storage::LocalStore;

    fn meta(day: u32) -> ModelMetadata {
        ModelMetadata {
            created_by: "The Author".into(),
            comments: "Best model ever".into(),
            dataset_name: "aeroconf".into(),
            timestamp: Utc.with_ymd_and_hms(2024, 1, day, 0, 0, 0).unwrap(),
            git_commit: "unknown".into(),
            plugin: serde_json::json!({"model": "ssd_mobilenet_v2_coco"}),
        }
    }

    fn fixture() -> (tempfile::TempDir, tempfile::TempDir, LocalStore) {
        let files = tempfile::tempdir().unwrap();
        std::fs::write(files.path().join("model.bin"), b"weights").unwrap();
        std::fs::create_dir_all(files.path().join("extras/ckpt")).unwrap();
        std::fs::write(files.path().join("extras/label_map.txt"), b"1 cygnus").unwrap();
        std::fs::write(files.path().join("extras/ckpt/step_1000"), b"c").unwrap();
        let root = tempfile::tempdir().unwrap();
        let store = LocalStore::new(root.path());
        (files, root, store)
    }

    #[test]
    fn key_templates() {
        let id = "ab".to_string() + &"0".repeat(28) + "ef";
        assert_eq!(model_key("ssd", &id, ".bin"), format!("models/ssd_{id}.bin"));
        assert_eq!(metadata_key("ssd", &id), format!("models/ssd_{id}.json"));
        assert_eq!(metadata_key_for_file(&format!("ssd_{id}.tar.gz")), Some(format!("models/ssd_{id}.json")));
        assert_eq!(metadata_key_for_file("ssd_notanid.bin"), None);
        assert_eq!(model_extension(Path::new("a/model.tar.gz")), ".tar.gz");
        assert_eq!(model_extension(Path::new("model")), "");
        assert!(is_model_id(&new_model_id()));
    }

    #[test]
    fn register_lookup_round_trip() {
        let (files, _root, store) = fixture();
        let e = register("ssd", &files.path().join("model.bin"), Some(&files.path().join("extras")), meta(1), &store).unwrap();
        assert!(e.complete);
        assert!(e.model_key.ends_with(".bin"));
        assert_eq!(e.model_key.trim_end_matches(".bin"), e.metadata_key.trim_end_matches(".json"));
        assert_eq!(e.extras, vec![format!("extras/{}/ckpt/step_1000", e.unique_id), format!("extras/{}/label_map.txt", e.unique_id)]);
        assert_eq!(lookup(&e.unique_id, &store).unwrap(), e);
        let file = e.model_key.rsplit('/').next().unwrap();
        assert_eq!(metadata_key_for_file(file).unwrap(), e.metadata_key);
        assert!(matches!(lookup(&"0".repeat(32), &store), Err(Error::NotFound(_))));

        let out = tempfile::tempdir().unwrap();
        let path = download_model(&e.unique_id, &store, out.path()).unwrap();
        assert_eq!(std::fs::read(path).unwrap(), b"weights");
        assert!(out.path().join(&e.extras[1]).is_file());
    }

    #[test]
    fn empty_extras_is_valid() {
        let (files, _root, store) = fixture();
        let empty = tempfile::tempdir().unwrap();
        let e = register("ssd", &files.path().join("model.bin"), Some(empty.path()), meta(1), &store).unwrap();
        assert!(e.extras.is_empty() && e.complete);
        assert!(store.list(BucketRole::Models, "extras/").unwrap().is_empty());
    }

    #[test]
    fn listing_order_and_corruption() {
        let (files, _root, store) = fixture();
        assert!(list_models(&store).unwrap().is_empty());
        let old = register("ssd", &files.path().join("model.bin"), None, meta(1), &store).unwrap();
        let new = register("ssd", &files.path().join("model.bin"), None, meta(5), &store).unwrap();
        let rows = list_models(&store).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].entry.as_ref().unwrap().unique_id, new.unique_id);
        assert_eq!(rows[1].entry.as_ref().unwrap().unique_id, old.unique_id);

        let bad_key = metadata_key("broken", &"1".repeat(32));
        store.put(&ObjectKey::new(BucketRole::Models, bad_key.as_str()).unwrap(), b"{not json").unwrap();
        let rows = list_models(&store).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[..2].iter().all(|r| r.entry.is_some()));
        assert_eq!(rows[2].metadata_key, bad_key);
        assert!(rows[2].parse_error.is_some());
    }

    #[test]
    fn collisions_regenerate_once() {
        let (files, _root, store) = fixture();
        let fixed = "a".repeat(32);
        let first = register_with_ids("ssd", &files.path().join("model.bin"), None, meta(1), &store, &mut || fixed.clone()).unwrap();
        assert_eq!(first.unique_id, fixed);
        let mut ids = vec!["b".repeat(32), fixed.clone()];
        let second = register_with_ids("ssd", &files.path().join("model.bin"), None, meta(2), &store, &mut || ids.pop().unwrap()).unwrap();
        assert_eq!(second.unique_id, "b".repeat(32));
        let err = register_with_ids("ssd", &files.path().join("model.bin"), None, meta(3), &store, &mut || fixed.clone());
        assert!(matches!(err, Err(Error::IdCollision(_))));
    }

    #[test]
    fn missing_model_file_is_io() {
        let (files, _root, store) = fixture();
        let err = register("ssd", &files.path().join("nope.bin"), None, meta(1), &store).unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Io);
        assert!(register("bad name", &files.path().join("model.bin"), None, meta(1), &store).is_err());
    }
}
