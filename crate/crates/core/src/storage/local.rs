use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{files_under, validate_prefix, BucketNames, BucketRole, ObjectKey, ObjectStore};
use crate::error::{Error, Result};

/// Staging directory for atomic writes, next to the bucket directories.
const STAGING_DIR: &str = ".staging";

/// Filesystem backend: key `k` in bucket `b` lives at `{root}/{b}/{k}`.
#[derive(Debug)]
pub struct LocalStore {
    root: PathBuf,
    buckets: BucketNames,
    counter: AtomicU64,
}

impl LocalStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self::with_buckets(root, BucketNames::default())
    }

    pub fn with_buckets(root: impl Into<PathBuf>, buckets: BucketNames) -> Self {
        Self {
            root: root.into(),
            buckets,
            counter: AtomicU64::new(0),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn bucket_dir(&self, role: BucketRole) -> PathBuf {
        self.root.join(self.buckets.name(role))
    }

    pub fn path_of(&self, key: &ObjectKey) -> PathBuf {
        let mut p = self.bucket_dir(key.role());
        p.extend(key.key().split('/'));
        p
    }
}

fn io(ctx: String) -> impl FnOnce(std::io::Error) -> Error {
    move |e| Error::io(ctx, e)
}

/// A key whose path is a directory, or runs through a file, names no object.
fn is_missing(e: &std::io::Error, path: &Path) -> bool {
    use std::io::ErrorKind::*;
    matches!(e.kind(), NotFound | NotADirectory | IsADirectory) || path.is_dir()
}

impl ObjectStore for LocalStore {
    fn put(&self, key: &ObjectKey, bytes: &[u8]) -> Result<()> {
        let target = self.path_of(key);
        let parent = target.parent().expect("keys have a bucket directory parent");
        std::fs::create_dir_all(parent).map_err(io(format!("creating {}", parent.display())))?;
        let staging = self.root.join(STAGING_DIR);
        std::fs::create_dir_all(&staging).map_err(io(format!("creating {}", staging.display())))?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let tmp = staging.join(format!("{}-{n}.part", std::process::id()));
        std::fs::write(&tmp, bytes).map_err(io(format!("writing {}", tmp.display())))?;
        std::fs::rename(&tmp, &target).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Error::io(format!("moving object into {}", target.display()), e)
        })
    }

    fn get(&self, key: &ObjectKey) -> Result<Vec<u8>> {
        let path = self.path_of(key);
        match std::fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if is_missing(&e, &path) => Err(Error::NotFound(key.to_string())),
            Err(e) => Err(Error::io(format!("reading {}", path.display()), e)),
        }
    }

    fn list(&self, role: BucketRole, prefix: &str) -> Result<Vec<String>> {
        validate_prefix(prefix)?;
        let dir = self.bucket_dir(role);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        // Narrow the walk to the deepest directory implied by the prefix.
        let (sub, _) = prefix.rsplit_once('/').unwrap_or(("", prefix));
        let mut start = dir.clone();
        start.extend(sub.split('/').filter(|s| !s.is_empty()));
        if !start.is_dir() {
            return Ok(Vec::new());
        }
        let base = if sub.is_empty() { String::new() } else { format!("{sub}/") };
        let mut keys: Vec<String> = files_under(&start)?
            .into_iter()
            .map(|rel| format!("{base}{rel}"))
            .filter(|k| k.starts_with(prefix))
            .collect();
        keys.sort();
        Ok(keys)
    }

    fn exists(&self, key: &ObjectKey) -> Result<bool> {
        Ok(self.path_of(key).is_file())
    }

    fn delete(&self, key: &ObjectKey) -> Result<()> {
        let path = self.path_of(key);
        match std::fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if is_missing(&e, &path) => return Ok(()),
            Err(e) => return Err(Error::io(format!("deleting {}", path.display()), e)),
        }
        // Prune empty parents so the tree mirrors the key space.
        let stop = self.bucket_dir(key.role());
        let mut dir = path.parent().map(Path::to_path_buf);
        while let Some(d) = dir {
            if d == stop || std::fs::remove_dir(&d).is_err() {
                break;
            }
            dir = d.parent().map(Path::to_path_buf);
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("local:{}", self.root.display())
    }
}
