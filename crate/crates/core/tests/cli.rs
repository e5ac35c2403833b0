use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

use proto_curriculum::data_io::load_indices;
use proto_curriculum::prototypicality::decode_score_records;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proto-curriculum"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: String,
}

impl Fixture {
    /// Synthetic blobs plus a config with the given overrides.
    fn new(clusters: usize, per_cluster: usize, extra: Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let emb = root.join("emb.bin");
        ok(&[
            "synth",
            "--clusters",
            &clusters.to_string(),
            "--per-cluster",
            &per_cluster.to_string(),
            "--dim",
            "8",
            "--separation",
            "50",
            "--spread",
            "0.5",
            "--seed",
            "11",
            "--out",
            emb.to_str().unwrap(),
        ]);
        let mut cfg = json!({
            "embeddings_path": "emb.bin",
            "output_dir": "out",
            "master_seed": 42,
            "kmeans": { "k": clusters, "batch_size": 256 },
        });
        for (k, v) in extra.as_object().unwrap() {
            cfg[k] = v.clone();
        }
        let config = root.join("config.json");
        fs::write(&config, cfg.to_string()).unwrap();
        Fixture {
            _dir: dir,
            config: config.to_str().unwrap().to_owned(),
            root,
        }
    }

    fn out(&self) -> PathBuf {
        self.root.join("out")
    }

    fn cmd(&self, sub: &str, extra: &[&str]) -> Vec<String> {
        let mut v = vec![sub.to_owned(), "--config".to_owned(), self.config.clone()];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }

    fn ok(&self, sub: &str, extra: &[&str]) -> Value {
        let args = self.cmd(sub, extra);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }

    fn code(&self, sub: &str, extra: &[&str]) -> i32 {
        let args = self.cmd(sub, extra);
        run(&args.iter().map(String::as_str).collect::<Vec<_>>())
            .status
            .code()
            .unwrap()
    }

    fn through_schedule(&self, schedule_args: &[&str]) {
        self.ok("cluster", &[]);
        self.ok("score", &[]);
        self.ok("schedule", schedule_args);
    }
}

#[test]
fn sweep_picks_the_number_of_blobs() {
    let f = Fixture::new(4, 150, json!({ "k_sweep": { "k_min": 2, "k_max": 8 } }));
    let report = f.ok("cluster", &[]);
    assert_eq!(report["k"], 4);
    let sweep = read_json(f.out().join("k_sweep.json"));
    assert_eq!(sweep.as_array().unwrap().len(), 7);
    let sidecar = read_json(f.out().join("cluster.json"));
    assert_eq!(sidecar["k"], 4);
    assert_eq!(sidecar["per_cluster_counts"], json!([150, 150, 150, 150]));
}

#[test]
fn explicit_k_overrides_the_sweep() {
    let f = Fixture::new(4, 50, json!({ "k_sweep": { "k_min": 2, "k_max": 8 } }));
    let report = f.ok("cluster", &["--k", "3"]);
    assert_eq!(report["k"], 3);
    assert!(report.get("sweep").is_none());
    assert_eq!(read_json(f.out().join("cluster.json"))["k"], 3);
    assert!(!f.out().join("k_sweep.json").exists());
}

#[test]
fn missing_embeddings_is_a_data_error() {
    let f = Fixture::new(2, 10, json!({ "embeddings_path": "nope.bin" }));
    assert_eq!(f.code("cluster", &[]), 3);
}

#[test]
fn bad_config_is_a_config_error() {
    let f = Fixture::new(2, 10, json!({ "unknown_field": 1 }));
    assert_eq!(f.code("cluster", &[]), 2);
    let f = Fixture::new(2, 10, json!({ "kmeans": { "k": 1 } }));
    assert_eq!(f.code("cluster", &[]), 2);
}

#[test]
fn score_sidecar_summarizes_the_distribution() {
    let f = Fixture::new(3, 40, json!({}));
    f.ok("cluster", &[]);
    f.ok("score", &[]);
    let sidecar = read_json(f.out().join("scores.json"));
    let hist: u64 = sidecar["histogram"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(hist, 120);
    assert_eq!(sidecar["histogram"].as_array().unwrap().len(), 20);
    for v in sidecar["per_cluster_max_normalized"].as_array().unwrap() {
        assert_eq!(v.as_f64().unwrap(), 1.0);
    }
    let (normalized, _, _) = decode_score_records(&fs::read(f.out().join("scores.bin")).unwrap()).unwrap();
    assert_eq!(normalized.len(), 120);
}

#[test]
fn schedule_hits_its_endpoints_and_is_monotone() {
    let f = Fixture::new(3, 40, json!({}));
    f.through_schedule(&[]);
    let schedule = read_json(f.out().join("schedule.json"));
    let entries = schedule["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 800);
    assert_eq!(entries[0]["tau"].as_f64().unwrap(), 0.07);
    assert_eq!(entries[799]["tau"].as_f64().unwrap(), 0.6);

    let csv = fs::read_to_string(f.out().join("schedule.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,tau,effective_fraction"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            (cols[1], cols[2])
        })
        .collect();
    assert_eq!(rows.len(), 800);
    for w in rows.windows(2) {
        assert!(w[1].0 >= w[0].0);
        assert!(w[1].1 >= w[0].1);
    }
}

#[test]
fn single_epoch_schedule() {
    let f = Fixture::new(3, 20, json!({}));
    f.through_schedule(&["--epochs", "1"]);
    let schedule = read_json(f.out().join("schedule.json"));
    assert_eq!(schedule["entries"].as_array().unwrap().len(), 1);
    f.ok("sample", &["--epoch", "0"]);
    assert_eq!(f.code("sample", &["--epoch", "1"]), 2);
}

#[test]
fn effective_size_mode_tracks_targets() {
    let f = Fixture::new(3, 100, json!({}));
    f.through_schedule(&["--mode", "effective_size", "--start", "0.2", "--end", "0.6", "--epochs", "20"]);
    let schedule = read_json(f.out().join("schedule.json"));
    let entries = schedule["entries"].as_array().unwrap();
    assert!((entries[0]["effective_fraction"].as_f64().unwrap() - 0.2).abs() <= 1e-4);
    assert!((entries[19]["effective_fraction"].as_f64().unwrap() - 0.6).abs() <= 1e-4);
    for w in entries.windows(2) {
        assert!(w[1]["tau"].as_f64().unwrap() >= w[0]["tau"].as_f64().unwrap());
    }
    assert_eq!(f.code("schedule", &["--mode", "effective_size", "--end", "0.9"]), 2);
}

#[test]
fn sampling_is_reproducible() {
    let f = Fixture::new(3, 40, json!({ "schedule": { "total_epochs": 10 } }));
    f.through_schedule(&[]);
    f.ok("sample", &["--epoch", "4"]);
    let file = f.out().join("epochs").join("epoch_0004.idx");
    let first = fs::read(&file).unwrap();
    fs::remove_file(&file).unwrap();
    f.ok("sample", &["--epoch", "4"]);
    assert_eq!(fs::read(&file).unwrap(), first);

    f.ok("sample", &["--all"]);
    let mut names: Vec<String> = fs::read_dir(f.out().join("epochs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 10);
    assert_eq!(names[0], "epoch_0000.idx");
    assert_eq!(names[9], "epoch_0009.idx");
    assert_eq!(fs::read(&file).unwrap(), first);
    assert_eq!(load_indices(&file).unwrap().len(), 120);

    assert_eq!(f.code("sample", &["--epoch", "10"]), 2);
    // The schedule pins the seed; a different one for sampling alone is rejected.
    assert_eq!(f.code("sample", &["--epoch", "4", "--master-seed", "7"]), 2);
}

#[test]
fn low_temperature_prefers_prototypical_samples() {
    let f = Fixture::new(4, 250, json!({ "schedule": { "total_epochs": 5 } }));
    f.through_schedule(&[]);
    f.ok("sample", &["--epoch", "0"]);
    let (normalized, _, _) = decode_score_records(&fs::read(f.out().join("scores.bin")).unwrap()).unwrap();
    let draws = load_indices(&f.out().join("epochs").join("epoch_0000.idx")).unwrap();
    let population = normalized.iter().filter(|&&d| d < 0.2).count() as f64 / normalized.len() as f64;
    let drawn = draws.iter().filter(|&&i| normalized[i as usize] < 0.2).count() as f64 / draws.len() as f64;
    assert!(drawn > population, "{drawn} <= {population}");
}

#[test]
fn verify_accepts_healthy_artifacts_and_flags_corruption() {
    let f = Fixture::new(3, 200, json!({ "schedule": { "total_epochs": 10 } }));
    f.through_schedule(&[]);
    let report = f.ok("verify", &["--trials", "100"]);
    assert_eq!(report["passed"], true);
    assert!(f.out().join("verify.json").exists());
    assert_eq!(f.code("verify", &["--trials", "0"]), 2);

    let path = f.out().join("scores.bin");
    let mut bytes = fs::read(&path).unwrap();
    let (normalized, _, _) = decode_score_records(&bytes).unwrap();
    let bumped = if normalized[0] > 0.5 { 0.0f32 } else { 1.0f32 };
    bytes[20..24].copy_from_slice(&bumped.to_le_bytes());
    fs::write(&path, &bytes).unwrap();
    assert_eq!(f.code("verify", &["--trials", "20"]), 4);

    bytes.truncate(30);
    fs::write(&path, &bytes).unwrap();
    assert_eq!(f.code("verify", &["--trials", "20"]), 4);
}
