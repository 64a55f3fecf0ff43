use super::*;
use crate::storage::{BucketNames, Credentials, RetryPolicy, S3Config, S3Store};

const MANIFEST_DIR: &str = env!("CARGO_MANIFEST_DIR");

fn small_config(name: &str, extra: &str) -> String {
    format!(
        "imageset_name: {name}
author: tester
mesh: {MANIFEST_DIR}/assets/cube.obj
camera: {{width: 48, height: 32, vertical_fov_deg: 50}}
sequence: {{name: s, seed: 5, mode: random, count: 4}}
ranges:
  position: {{fixed: [0, 0, 0]}}
  distance: [3, 6]
  offset: {{min: [0.4, 0.4], max: [0.6, 0.6]}}
  target_orientation: uniform_random
  background_orientation: uniform_random
  lighting_direction: uniform_random
tags: [cube]
{extra}"
    )
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run_args(args: &[&str], store: Option<&dyn ObjectStore>) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["orbitforge", "--quiet"];
    full.extend_from_slice(args);
    let code = run_with(full, store, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_configs_parse_and_validate() {
    for name in ["random_orbit.yaml", "approach.yaml"] {
        let cfg = GenerationConfig::load(&Path::new(MANIFEST_DIR).join("configs").join(name)).unwrap();
        cfg.validate().unwrap();
    }
    let c: CurationConfig = load_yaml(&Path::new(MANIFEST_DIR).join("configs/dataset.yaml")).unwrap();
    let f: FilterPlan = load_yaml(&Path::new(MANIFEST_DIR).join("configs/filter.yaml")).unwrap();
    c.validate().unwrap();
    f.validate(&c).unwrap();
}

#[test]
fn unknown_key_exits_2_with_key_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.yaml");
    std::fs::write(&cfg, small_config("x", "").replace("seed: 5", "seeed: 5")).unwrap();
    let r = run_args(&["generate", p(&cfg), "--out", p(dir.path())], None);
    assert_eq!(r.code, 2, "{}", r.err);
    assert!(r.err.contains("seeed"), "{}", r.err);
    assert!(!dir.path().join("x").exists());
}

#[test]
fn generate_then_list_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.yaml");
    std::fs::write(&cfg, small_config("cubes", "")).unwrap();
    let sets = dir.path().join("sets");
    let r = run_args(&["--fixed-clock", "generate", p(&cfg), "--out", p(&sets)], None);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("imageset_metadata.json"));
    assert!(r.out.contains("4 frames"));

    // Rerun without --overwrite refuses.
    assert_eq!(run_args(&["generate", p(&cfg), "--out", p(&sets)], None).code, 3);

    let store_root = dir.path().join("store");
    let store = LocalStore::new(&store_root);
    let listed = run_args(&["imageset", "list"], Some(&store));
    assert_eq!(listed.code, 0);
    assert_eq!(listed.out.lines().count(), 1);

    assert_eq!(run_args(&["imageset", "upload", "cubes", "--dir", p(&sets)], Some(&store)).code, 0);
    let listed = run_args(&["imageset", "list"], Some(&store));
    assert!(listed.out.lines().nth(1).unwrap().starts_with("cubes"));
    let back = dir.path().join("back");
    let r = run_args(&["imageset", "download", "cubes", "--dir", p(&back)], Some(&store));
    assert_eq!(r.code, 0, "{}", r.err);
    for f in crate::storage::files_under(&sets.join("cubes")).unwrap() {
        assert_eq!(std::fs::read(sets.join("cubes").join(&f)).unwrap(), std::fs::read(back.join("cubes").join(&f)).unwrap());
    }
}

#[test]
fn upload_to_unreachable_endpoint_exits_4_and_keeps_local_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.yaml");
    std::fs::write(&cfg, small_config("up", "upload: true\n")).unwrap();
    let mut s3 = S3Config::new("http://127.0.0.1:1", "us-east-1", Credentials { access_key_id: "a".into(), secret_key: "b".into() }).unwrap();
    s3.retry = RetryPolicy::none();
    let store = S3Store::new(s3, BucketNames::default());
    let r = run_args(&["generate", p(&cfg), "--out", p(dir.path())], Some(&store));
    assert_eq!(r.code, 4, "{}", r.err);
    assert!(ImagesetSource::Dir(dir.path()).load("up").is_ok());
}

#[test]
fn upload_without_store_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.yaml");
    std::fs::write(&cfg, small_config("up", "upload: true\n")).unwrap();
    if std::env::var_os(ENV_ENDPOINT).is_none() {
        assert_eq!(run_args(&["generate", p(&cfg), "--out", p(dir.path())], None).code, 2);
        assert!(!dir.path().join("up").exists());
    }
}

#[test]
fn curate_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ds.yaml");
    std::fs::write(&cfg, "dataset_name: d\nlocal: true\nimageset: [missing]\nmetadata: {created_by: The Author}\n").unwrap();
    let r = run_args(&["curate", p(&cfg), "--imagesets", p(dir.path()), "--out", p(dir.path())], None);
    assert_eq!(r.code, 3, "{}", r.err);
    std::fs::write(&cfg, "dataset_name: d\nimageset: [a]\nk_folds: 2\nmetadata: {created_by: x}\n").unwrap();
    assert_eq!(run_args(&["curate", p(&cfg)], None).code, 2);
}

#[test]
fn eval_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.jsonl");
    let det = dir.path().join("det.jsonl");
    std::fs::write(&gt, "{\"image_id\":\"a\",\"present\":true,\"bbox\":[0,0,10,10]}\n{\"image_id\":\"b\",\"present\":false}\n").unwrap();
    std::fs::write(&det, "{\"image_id\":\"a\",\"bbox\":[0,0,10,10],\"confidence\":0.9}\n").unwrap();
    let json = dir.path().join("r.json");
    let r = run_args(&["eval", p(&gt), p(&det), "--json", p(&json)], None);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("accuracy              1.0000"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(report["precision"], 1.0);

    let csv = dir.path().join("s.csv");
    let r = run_args(&["eval", p(&gt), p(&det), "--sweep", "--csv", p(&csv)], None);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("best confidence threshold 0.00"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 21);

    std::fs::write(&det, "{\"image_id\":\"a\",\"bbox\":[0,0,10,10],\"confidence\":0.9}\n{broken\n").unwrap();
    let r = run_args(&["eval", p(&gt), p(&det)], None);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("line 2"), "{}", r.err);
    assert_eq!(run_args(&["eval", p(&gt)], None).code, 2);
}

#[test]
fn model_commands() {
    let dir = tempfile::tempdir().unwrap();
    let store = LocalStore::new(dir.path().join("store"));
    let r = run_args(&["model", "list"], Some(&store));
    assert_eq!((r.code, r.out.lines().count()), (0, 1));
    let missing = dir.path().join("nope.bin");
    assert_eq!(run_args(&["model", "register", "ssd", p(&missing), "--dataset", "d"], Some(&store)).code, 3);

    let model = dir.path().join("model.bin");
    std::fs::write(&model, b"w").unwrap();
    let r = run_args(&["model", "register", "ssd", p(&model), "--dataset", "d", "--created-by", "The Author"], Some(&store));
    assert_eq!(r.code, 0, "{}", r.err);
    let id = r.out.lines().next().unwrap().to_string();
    assert!(run_args(&["model", "list"], Some(&store)).out.contains(&id));
    let dl = dir.path().join("dl");
    let r = run_args(&["model", "download", &id, "--dir", p(&dl)], Some(&store));
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(std::fs::read(dl.join(format!("models/ssd_{id}.bin"))).unwrap(), b"w");
    assert_eq!(run_args(&["model", "download", &"0".repeat(32)], Some(&store)).code, 4);
}
