//! Generate the `configs/random_orbit.yaml` imageset through the library API,
//! with a progress line per frame.
//!
//! ```bash
//! cargo run --release --example random_imageset -- out/imagesets
//! ```

use std::path::Path;

use orbitforge::cli::{generate_imageset, GenerateOptions, GenerationConfig};

fn main() -> orbitforge::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "example-out/imagesets".into());
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let cfg = GenerationConfig::load(&configs.join("random_orbit.yaml"))?;

    let progress = |done: usize, total: usize, id: &str| eprint!("\r{done}/{total} {id}   ");
    let mut opts = GenerateOptions::new(out);
    opts.overwrite = true;
    opts.progress = Some(&progress);

    let outcome = generate_imageset(&cfg, &configs, &opts)?;
    eprintln!();
    println!("{} frames in {}", outcome.manifest.frame_count, outcome.dir.display());
    println!("tags: {}", outcome.manifest.tag_vocabulary.join(", "));
    if outcome.frames_without_target > 0 {
        println!("{} frames have no visible target", outcome.frames_without_target);
    }
    Ok(())
}
