//! Register a model file with extras in a local object store, list the
//! registry and fetch the model back by id.

use std::path::Path;

use orbitforge::registry::{download_model, list_models, register, ModelMetadata};
use orbitforge::storage::LocalStore;
use orbitforge::Error;

fn main() -> orbitforge::Result<()> {
    let work = Path::new("example-out/registry");
    std::fs::create_dir_all(work.join("extras")).map_err(|e| Error::io("creating work dir", e))?;
    std::fs::write(work.join("ssd.tar.gz"), b"pretend weights").map_err(|e| Error::io("writing model", e))?;
    std::fs::write(work.join("extras/labels.txt"), b"cygnus\n").map_err(|e| Error::io("writing extras", e))?;

    let store = LocalStore::new(work.join("store"));
    let metadata = ModelMetadata {
        created_by: "The Author".into(),
        comments: "baseline detector".into(),
        dataset_name: "cygnus_detection".into(),
        timestamp: chrono::Utc::now(),
        git_commit: String::new(),
        plugin: serde_json::json!({"epochs": 40, "learning_rate": 0.004}),
    };
    let entry = register("ssd_mobilenet", &work.join("ssd.tar.gz"), Some(&work.join("extras")), metadata, &store)?;
    println!("registered {} as {}", entry.model_key, entry.unique_id);

    for row in list_models(&store)? {
        match row.entry {
            Some(e) => println!("{}  {}  {}  {}", e.unique_id, e.model_name, e.metadata.dataset_name, e.metadata.timestamp),
            None => println!("{}  unreadable: {}", row.metadata_key, row.parse_error.unwrap_or_default()),
        }
    }

    let path = download_model(&entry.unique_id, &store, &work.join("download"))?;
    println!("downloaded to {}", path.display());
    Ok(())
}
