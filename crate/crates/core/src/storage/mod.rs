//! Object storage over three buckets (imagesets, datasets, models), backed
//! either by a local directory tree or an S3-compatible HTTP endpoint.

mod local;
mod s3;
pub mod sigv4;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use local::LocalStore;
pub use s3::{RetryPolicy, S3Config, S3Store};
pub use sigv4::Credentials;

pub const ENV_ENDPOINT: &str = "ORBITFORGE_STORAGE_ENDPOINT";
pub const ENV_ACCESS_KEY_ID: &str = "ORBITFORGE_ACCESS_KEY_ID";
pub const ENV_SECRET_KEY: &str = "ORBITFORGE_SECRET_KEY";
pub const ENV_REGION: &str = "ORBITFORGE_REGION";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketRole {
    Imagesets,
    Datasets,
    Models,
}

impl BucketRole {
    pub const ALL: [BucketRole; 3] = [BucketRole::Imagesets, BucketRole::Datasets, BucketRole::Models];
}

impl fmt::Display for BucketRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BucketRole::Imagesets => "imagesets",
            BucketRole::Datasets => "datasets",
            BucketRole::Models => "models",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketNames {
    pub imagesets: String,
    pub datasets: String,
    pub models: String,
}

impl Default for BucketNames {
    fn default() -> Self {
        Self {
            imagesets: "imagesets".into(),
            datasets: "datasets".into(),
            models: "models".into(),
        }
    }
}

impl BucketNames {
    pub fn name(&self, role: BucketRole) -> &str {
        match role {
            BucketRole::Imagesets => &self.imagesets,
            BucketRole::Datasets => &self.datasets,
            BucketRole::Models => &self.models,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names = BucketRole::ALL.map(|r| self.name(r));
        for n in names {
            let ok = !n.is_empty()
                && !n.starts_with('.')
                && n.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '.' | '_'));
            if !ok {
                return Err(Error::Config(format!("invalid bucket name '{n}'")));
            }
        }
        if names[0] == names[1] || names[0] == names[2] || names[1] == names[2] {
            return Err(Error::Config(format!("bucket names must be distinct: {names:?}")));
        }
        Ok(())
    }
}

/// A validated key inside one bucket: slash-separated, no empty or `..` segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectKey {
    role: BucketRole,
    key: String,
}

impl ObjectKey {
    pub fn new(role: BucketRole, key: impl Into<String>) -> Result<Self> {
        let key = key.into();
        validate_key(&key)?;
        Ok(Self { role, key })
    }

    pub fn role(&self) -> BucketRole {
        self.role
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.role, self.key)
    }
}

fn validate_key(key: &str) -> Result<()> {
    let bad = key.is_empty()
        || key.contains('\\')
        || key.contains('\0')
        || key.split('/').any(|s| s.is_empty() || s == "." || s == "..");
    if bad {
        Err(Error::InvalidKey(key.to_string()))
    } else {
        Ok(())
    }
}

/// Checks a listing prefix: empty, or a key prefix whose complete segments are valid.
pub(crate) fn validate_prefix(prefix: &str) -> Result<()> {
    if prefix.is_empty() {
        return Ok(());
    }
    let trimmed = prefix.strip_suffix('/').unwrap_or(prefix);
    validate_key(trimmed).map_err(|_| Error::InvalidKey(prefix.to_string()))
}

/// Minimal object store. Implementations are safe to share between threads.
pub trait ObjectStore: Send + Sync {
    fn put(&self, key: &ObjectKey, bytes: &[u8]) -> Result<()>;
    /// Missing keys yield [`Error::NotFound`].
    fn get(&self, key: &ObjectKey) -> Result<Vec<u8>>;
    /// Keys in the bucket starting with `prefix`, sorted lexicographically.
    fn list(&self, role: BucketRole, prefix: &str) -> Result<Vec<String>>;
    fn exists(&self, key: &ObjectKey) -> Result<bool>;
    /// Deleting a missing key is not an error.
    fn delete(&self, key: &ObjectKey) -> Result<()>;
    /// Human-readable location, for messages.
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Local { root: PathBuf },
    S3(S3Config),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreConfig {
    pub backend: Backend,
    pub buckets: BucketNames,
}

impl StoreConfig {
    pub fn local(root: impl Into<PathBuf>) -> Self {
        Self {
            backend: Backend::Local { root: root.into() },
            buckets: BucketNames::default(),
        }
    }

    /// Remote configuration from `ORBITFORGE_*` environment variables.
    pub fn s3_from_env(buckets: BucketNames) -> Result<Self> {
        let var = |name: &str| {
            std::env::var(name)
                .ok()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| Error::Config(format!("environment variable {name} is not set")))
        };
        let endpoint = var(ENV_ENDPOINT)?;
        let credentials = Credentials {
            access_key_id: var(ENV_ACCESS_KEY_ID)?,
            secret_key: var(ENV_SECRET_KEY)?,
        };
        let region = var(ENV_REGION).unwrap_or_else(|_| "us-east-1".into());
        Ok(Self {
            backend: Backend::S3(S3Config::new(&endpoint, &region, credentials)?),
            buckets,
        })
    }

    pub fn open(&self) -> Result<Box<dyn ObjectStore>> {
        self.buckets.validate()?;
        Ok(match &self.backend {
            Backend::Local { root } => Box::new(LocalStore::with_buckets(root, self.buckets.clone())),
            Backend::S3(cfg) => Box::new(S3Store::new(cfg.clone(), self.buckets.clone())),
        })
    }
}

fn join_key(prefix: &str, rel: &str) -> String {
    if prefix.is_empty() {
        rel.to_string()
    } else {
        format!("{}/{rel}", prefix.trim_end_matches('/'))
    }
}

/// Relative paths of every regular file under `dir`, with `/` separators, sorted.
pub fn files_under(dir: &Path) -> Result<Vec<String>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        let entries =
            std::fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
            let path = entry.path();
            let ft = entry
                .file_type()
                .map_err(|e| Error::io(format!("inspecting {}", path.display()), e))?;
            if ft.is_dir() {
                walk(base, &path, out)?;
            } else if ft.is_file() {
                let rel = path.strip_prefix(base).expect("walk stays under base");
                let parts: Vec<String> = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                out.push(parts.join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Uploads every file under `dir` to `prefix/<relative path>`; returns the keys written.
/// Files named in `last` are uploaded after all others, in the given order.
pub fn upload_dir(
    store: &dyn ObjectStore,
    role: BucketRole,
    prefix: &str,
    dir: &Path,
    last: &[&str],
) -> Result<Vec<String>> {
    let files = files_under(dir)?;
    let (tail, head): (Vec<&String>, Vec<&String>) =
        files.iter().partition(|f| last.contains(&f.as_str()));
    let mut ordered = head;
    for name in last {
        ordered.extend(tail.iter().copied().filter(|f| f.as_str() == *name));
    }
    let mut keys = Vec::with_capacity(ordered.len());
    for rel in ordered {
        let path = dir.join(rel);
        let bytes =
            std::fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let key = ObjectKey::new(role, join_key(prefix, rel))?;
        store.put(&key, &bytes)?;
        keys.push(key.key().to_string());
    }
    Ok(keys)
}

/// Downloads every key under `prefix/` into `dir`, preserving relative paths.
pub fn download_prefix(
    store: &dyn ObjectStore,
    role: BucketRole,
    prefix: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let prefix = format!("{}/", prefix.trim_end_matches('/'));
    let keys = store.list(role, &prefix)?;
    if keys.is_empty() {
        return Err(Error::NotFound(format!("{role}/{prefix}")));
    }
    let mut written = Vec::with_capacity(keys.len());
    for key in keys {
        let rel = &key[prefix.len()..];
        let bytes = store.get(&ObjectKey::new(role, key.as_str())?)?;
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
    }
    Ok(written)
}

/// Distinct first path segments of keys in a bucket (e.g. imageset names).
pub fn top_level_names(store: &dyn ObjectStore, role: BucketRole) -> Result<Vec<String>> {
    let mut names: Vec<String> = store
        .list(role, "")?
        .into_iter()
        .filter_map(|k| k.split_once('/').map(|(first, _)| first.to_string()))
        .collect();
    names.dedup();
    Ok(names)
}
