//! Build two small imagesets, then curate them with a Listing-style config:
//! cap one source, keep frames tagged `Cygnus`, split 80/20 with five folds.

use std::path::Path;

use orbitforge::cli::{generate_imageset, load_yaml, GenerateOptions, GenerationConfig};
use orbitforge::curation::{curate, CopyImagesTransform, CurationConfig, CurationContext, FilterPlan};
use orbitforge::imageset::Clock;
use orbitforge::sequences::SequenceMode;

fn main() -> orbitforge::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let configs = root.join("configs");
    let work = Path::new("example-out/curate");
    let imagesets = work.join("imagesets");

    for (file, count) in [("random_orbit.yaml", 30), ("approach.yaml", 0)] {
        let mut cfg = GenerationConfig::load(&configs.join(file))?;
        // Shrink the frames so the example runs quickly.
        cfg.camera.width = 96;
        cfg.camera.height = 96;
        if count > 0 {
            cfg.sequence.mode = SequenceMode::Random { count };
        }
        let mut opts = GenerateOptions::new(&imagesets);
        opts.overwrite = true;
        opts.clock = Clock::fixed_epoch();
        let done = generate_imageset(&cfg, &configs, &opts)?;
        println!("imageset {}: {} frames", done.manifest.name, done.manifest.frame_count);
    }

    let config: CurationConfig = load_yaml(&configs.join("dataset.yaml"))?;
    let plan: FilterPlan = load_yaml(&configs.join("filter.yaml"))?;

    let ctx = CurationContext {
        local_imagesets: &imagesets,
        store: None,
        output_root: &work.join("datasets"),
        created: chrono::Utc::now(),
        git_commit: String::new(),
        transform: &CopyImagesTransform,
    };
    let dataset = curate(&config, &plan, &ctx)?;
    let c = &dataset.metadata.counts;
    println!("dataset {}: {} selected, {} train, {} test, folds {:?}", dataset.name, c.selected, c.train, c.test, c.folds);
    println!("written to {}", dataset.local_dir.unwrap().display());
    Ok(())
}
