//! Command-line front end: `generate`, `curate`, `eval`, `imageset` and
//! `model` subcommands. Exit codes: 0 success, 2 configuration, 3 I/O,
//! 4 storage, 5 internal.

mod generate;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use generate::{
    generate_imageset, CameraConfig, GenerateOptions, GenerateOutcome, GenerationConfig, Progress,
};

use crate::curation::{curate, CopyImagesTransform, CurationConfig, CurationContext, FilterPlan};
use crate::error::{Error, ErrorClass, Result};
use crate::evaluation::{
    default_grid, evaluate, format_table, read_detections, read_ground_truth, sweep_csv,
    sweep_threshold, DEFAULT_IOU_THRESHOLD,
};
use crate::imageset::{
    download_imageset, format_timestamp, git_commit_of, upload_imageset, Clock, ImagesetManifest,
    ImagesetSource, MANIFEST_FILE,
};
use crate::registry::{self, ModelMetadata};
use crate::storage::{LocalStore, ObjectStore, StoreConfig, ENV_ENDPOINT};

#[derive(Debug, Parser)]
#[command(name = "orbitforge", version, about = "Synthetic imagery, dataset curation, model storage and detection evaluation")]
pub struct Cli {
    /// Use a local directory as the object store (buckets become subdirectories).
    #[arg(long, global = true, value_name = "DIR")]
    pub store_root: Option<PathBuf>,
    /// Stamp outputs with 2000-01-01T00:00:00Z instead of the current time.
    #[arg(long, global = true)]
    pub fixed_clock: bool,
    /// Suppress per-frame progress on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render an imageset from a generation config.
    Generate {
        config: PathBuf,
        /// Directory that receives the imageset folder.
        #[arg(long, default_value = "imagesets")]
        out: PathBuf,
        /// Replace an existing imageset of the same name.
        #[arg(long)]
        overwrite: bool,
        /// Override the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Build a dataset from imagesets.
    Curate {
        config: PathBuf,
        /// Size caps, tag filters, final cap and seed.
        #[arg(long, value_name = "YAML")]
        filter: Option<PathBuf>,
        /// Local imageset directory, used when the config sets `local: true`.
        #[arg(long, default_value = "imagesets")]
        imagesets: PathBuf,
        /// Directory that receives the dataset folder.
        #[arg(long, default_value = "datasets")]
        out: PathBuf,
    },
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// List, upload or download imagesets.
    #[command(subcommand)]
    Imageset(ImagesetCommand),
    /// Register, list or download trained models.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth, JSON lines.
    pub ground_truth: PathBuf,
    /// Detections, JSON lines.
    pub detections: PathBuf,
    #[arg(long, default_value_t = 0.5, conflicts_with = "sweep")]
    pub conf_threshold: f64,
    /// Pick the confidence threshold that maximizes accuracy.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_threshold: f64,
    /// Write the report as JSON.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Write the sweep curve as CSV (with --sweep).
    #[arg(long, value_name = "PATH", requires = "sweep")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ImagesetCommand {
    /// List imagesets in the store, or in a local directory.
    List {
        #[arg(long, value_name = "DIR")]
        local: Option<PathBuf>,
    },
    /// Upload a local imageset.
    Upload {
        name: String,
        #[arg(long, default_value = "imagesets")]
        dir: PathBuf,
    },
    /// Download an imageset.
    Download {
        name: String,
        #[arg(long, default_value = "imagesets")]
        dir: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Store a trained model with its extras and metadata.
    Register {
        name: String,
        model_file: PathBuf,
        /// Directory of extra files (checkpoints, label maps, ...).
        #[arg(long)]
        extras: Option<PathBuf>,
        /// Dataset the model was trained on.
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "unknown")]
        created_by: String,
        #[arg(long, default_value = "")]
        comments: String,
        /// YAML or JSON file with free-form options to record.
        #[arg(long, value_name = "PATH")]
        plugin: Option<PathBuf>,
    },
    /// List models, newest first.
    List,
    /// Download a model with its metadata and extras.
    Download {
        id: String,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Io => 3,
        ErrorClass::Storage => 4,
        ErrorClass::Internal => 5,
    }
}

/// Parses `args` (program name first) and runs the command. `store`
/// overrides the store chosen from flags and environment.
pub fn run_with<I, T>(args: I, store: Option<&dyn ObjectStore>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match run(&cli, store, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Store from `--store-root`, else from `ORBITFORGE_*` variables when an endpoint is set.
fn open_store(cli: &Cli) -> Result<Option<Box<dyn ObjectStore>>> {
    if let Some(root) = &cli.store_root {
        return Ok(Some(Box::new(LocalStore::new(root))));
    }
    if std::env::var_os(ENV_ENDPOINT).is_some() {
        return Ok(Some(StoreConfig::s3_from_env(Default::default())?.open()?));
    }
    Ok(None)
}

fn require(store: Option<&dyn ObjectStore>) -> Result<&dyn ObjectStore> {
    store.ok_or_else(|| {
        Error::Config(format!("no object store configured: pass --store-root or set {ENV_ENDPOINT}"))
    })
}

fn config_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Reads a YAML config; parse errors become configuration errors naming the file.
pub fn load_yaml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_yaml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn run(cli: &Cli, store: Option<&dyn ObjectStore>, out: &mut dyn Write) -> Result<()> {
    let owned;
    let store = match store {
        Some(s) => Some(s),
        None => {
            owned = open_store(cli)?;
            owned.as_deref()
        }
    };
    let clock = if cli.fixed_clock { Clock::fixed_epoch() } else { Clock::System };
    let w = |out: &mut dyn Write, s: String| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io("writing output", e))
    };

    match &cli.command {
        Command::Generate { config, out: out_root, overwrite, workers } => {
            let cfg = GenerationConfig::load(config)?;
            cfg.validate()?;
            let store = if cfg.upload { Some(require(store)?) } else { None };
            let quiet = cli.quiet;
            let progress = move |n: usize, total: usize, id: &str| {
                if !quiet {
                    eprintln!("[{n}/{total}] {id}");
                }
            };
            let opts = GenerateOptions {
                out_root: out_root.clone(),
                overwrite: *overwrite,
                clock,
                workers: *workers,
                progress: Some(&progress),
            };
            let outcome = generate_imageset(&cfg, &config_dir(config), &opts)?;
            let manifest_path = outcome.dir.join(MANIFEST_FILE);
            w(out, format!("{}\n{} frames\n", manifest_path.display(), outcome.manifest.frame_count))?;
            if outcome.frames_without_target > 0 {
                log::warn!("{} frames have no visible target", outcome.frames_without_target);
            }
            if let Some(store) = store {
                let keys = upload_imageset(out_root, &cfg.imageset_name, store)?;
                w(out, format!("uploaded {} objects to {}\n", keys.len(), store.describe()))?;
            }
        }
        Command::Curate { config, filter, imagesets, out: out_root } => {
            let cfg: CurationConfig = load_yaml(config)?;
            cfg.validate()?;
            let plan: FilterPlan = match filter {
                Some(p) => load_yaml(p)?,
                None => FilterPlan::default(),
            };
            plan.validate(&cfg)?;
            let ctx = CurationContext {
                local_imagesets: imagesets,
                store,
                output_root: out_root,
                created: clock.now(),
                git_commit: git_commit_of(&config_dir(config)),
                transform: &CopyImagesTransform,
            };
            let art = curate(&cfg, &plan, &ctx)?;
            let c = &art.metadata.counts;
            w(out, format!("dataset {}: {} frames ({} train, {} test", art.name, c.selected, c.train, c.test))?;
            if !c.folds.is_empty() {
                w(out, format!(", folds {:?}", c.folds))?;
            }
            w(out, ")\n".into())?;
            if let Some(dir) = &art.local_dir {
                w(out, format!("{}\n", dir.display()))?;
            }
            if !art.uploaded_keys.is_empty() {
                w(out, format!("uploaded {} objects\n", art.uploaded_keys.len()))?;
            }
        }
        Command::Eval(args) => {
            for t in [args.conf_threshold, args.iou_threshold] {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
                }
            }
            let gts = read_ground_truth(&args.ground_truth)?;
            let dets = read_detections(&args.detections)?;
            let report = if args.sweep {
                let sweep = sweep_threshold(&gts, &dets, args.iou_threshold, &default_grid())?;
                w(out, format!("best confidence threshold {:.2}\n", sweep.best_threshold))?;
                if let Some(p) = &args.csv {
                    std::fs::write(p, sweep_csv(&sweep)).map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
                }
                sweep.best
            } else {
                evaluate(&gts, &dets, args.conf_threshold, args.iou_threshold)?
            };
            w(out, format_table(&report))?;
            if let Some(p) = &args.json {
                let mut bytes = serde_json::to_vec_pretty(&report)?;
                bytes.push(b'\n');
                std::fs::write(p, bytes).map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
            }
        }
        Command::Imageset(cmd) => match cmd {
            ImagesetCommand::List { local } => {
                let source = match local {
                    Some(dir) => ImagesetSource::Dir(dir),
                    None => ImagesetSource::Store(require(store)?),
                };
                w(out, format!("{:<32} {:>8}  {:<20} {}\n", "NAME", "FRAMES", "AUTHOR", "CREATED"))?;
                for name in source.list()? {
                    let m: ImagesetManifest = serde_json::from_slice(&source.read(&name, MANIFEST_FILE)?)?;
                    w(out, format!("{:<32} {:>8}  {:<20} {}\n", m.name, m.frame_count, m.author, format_timestamp(&m.created)))?;
                }
            }
            ImagesetCommand::Upload { name, dir } => {
                let store = require(store)?;
                let keys = upload_imageset(dir, name, store)?;
                w(out, format!("uploaded {} objects for {name}\n", keys.len()))?;
            }
            ImagesetCommand::Download { name, dir, overwrite } => {
                let m = download_imageset(require(store)?, name, dir, *overwrite)?;
                w(out, format!("{} ({} frames)\n", dir.join(name).display(), m.frame_count))?;
            }
        },
        Command::Model(cmd) => match cmd {
            ModelCommand::Register { name, model_file, extras, dataset, created_by, comments, plugin } => {
                registry::validate_model_name(name)?;
                let plugin = match plugin {
                    Some(p) => load_yaml::<serde_json::Value>(p)?,
                    None => serde_json::json!({}),
                };
                let store = require(store)?;
                let metadata = ModelMetadata {
                    created_by: created_by.clone(),
                    comments: comments.clone(),
                    dataset_name: dataset.clone(),
                    timestamp: clock.now(),
                    git_commit: git_commit_of(Path::new(".")),
                    plugin,
                };
                let entry = registry::register(name, model_file, extras.as_deref(), metadata, store)?;
                w(out, format!("{}\n{}\n{}\n", entry.unique_id, entry.model_key, entry.metadata_key))?;
            }
            ModelCommand::List => {
                let rows = registry::list_models(require(store)?)?;
                w(out, format!("{:<32}  {:<20} {:<20} {:<25} {}\n", "ID", "NAME", "DATASET", "TIMESTAMP", "COMPLETE"))?;
                for r in rows {
                    match (&r.entry, &r.parse_error) {
                        (Some(e), _) => w(out, format!(
                            "{:<32}  {:<20} {:<20} {:<25} {}\n",
                            e.unique_id,
                            e.model_name,
                            e.metadata.dataset_name,
                            format_timestamp(&e.metadata.timestamp),
                            if e.complete { "yes" } else { "no" }
                        ))?,
                        (None, err) => w(out, format!(
                            "{:<32}  unreadable metadata: {}\n",
                            r.metadata_key,
                            err.as_deref().unwrap_or("?")
                        ))?,
                    }
                }
            }
            ModelCommand::Download { id, dir } => {
                let path = registry::download_model(id, require(store)?, dir)?;
                w(out, format!("{}\n", path.display()))?;
            }
        },
    }
    Ok(())
}

#[cfg(test)]
mod tests;
