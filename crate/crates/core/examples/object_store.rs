//! Object store basics against the local backend, or against an S3-compatible
//! endpoint when `ORBITFORGE_STORAGE_ENDPOINT` and credentials are set.
//!
//! ```bash
//! ORBITFORGE_STORAGE_ENDPOINT=http://127.0.0.1:9000 \
//! ORBITFORGE_ACCESS_KEY_ID=minio ORBITFORGE_SECRET_KEY=minio123 \
//!     cargo run --example object_store
//! ```

use orbitforge::storage::{BucketNames, BucketRole, ObjectKey, StoreConfig, ENV_ENDPOINT};

fn main() -> orbitforge::Result<()> {
    let config = if std::env::var_os(ENV_ENDPOINT).is_some() {
        StoreConfig::s3_from_env(BucketNames::default())?
    } else {
        StoreConfig::local("example-out/store")
    };
    let store = config.open()?;
    println!("using {}", store.describe());

    for i in 0..3 {
        let key = ObjectKey::new(BucketRole::Imagesets, format!("demo/frame_{i}.txt"))?;
        store.put(&key, format!("frame {i}").as_bytes())?;
    }
    println!("listed: {:?}", store.list(BucketRole::Imagesets, "demo/")?);

    let key = ObjectKey::new(BucketRole::Imagesets, "demo/frame_1.txt")?;
    println!("get: {}", String::from_utf8_lossy(&store.get(&key)?));
    store.delete(&key)?;
    println!("exists after delete: {}", store.exists(&key)?);
    Ok(())
}
