use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// Hourly GEFCom-style file: power driven by wind speed from two components.
fn write_data(dir: &Path) -> PathBuf {
    let mut csv = String::from("TIMESTAMP,TARGETVAR,U10,V10,U100,V100\n");
    for t in 0..600 {
        let phase = t as f64 / 23.0;
        let (u, v) = (4.0 * phase.sin() + 1.0, 3.0 * (phase * 0.7).cos());
        let speed = (u * u + v * v).sqrt();
        let power = (speed / 6.0).min(1.0) * (1.0 + 0.05 * (t as f64 * 1.3).sin()).min(1.0);
        let _ = writeln!(
            csv,
            "2012{:02}{:02} {:02}:00,{power:.6},{:.4},{:.4},{u:.4},{v:.4}",
            1 + t / (24 * 28),
            1 + (t / 24) % 28,
            t % 24,
            u * 0.7,
            v * 0.7
        );
    }
    let path = dir.join("wind.csv");
    fs::write(&path, csv).unwrap();
    path
}

fn write_config(dir: &Path) -> PathBuf {
    let text = "\
# quick settings for tests
[data]
path = wind.csv
timestamp_column = TIMESTAMP
target_column = TARGETVAR

[train]
learning_rate = 0.1
max_rounds = 80

[run]
output_dir = {out}
models = windebm,lr,rt,pm
";
    write_data(dir);
    let path = dir.join("run.ini");
    fs::write(&path, text.replace("{out}", &dir.join("out").to_string_lossy())).unwrap();
    path
}

struct Fixture {
    dir: TempDir,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path());
        Self { dir, config }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_windebm"))
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }

    fn model(&self) -> String {
        self.out("model.json").to_string_lossy().into_owned()
    }
}

#[test]
fn train_evaluate_predict() {
    let f = Fixture::new();
    f.ok(&["train"]);
    let log = fs::read_to_string(f.out("train_log.txt")).unwrap();
    assert!(log.contains("main_rounds=") && log.contains("checksum="));
    let stdout = f.ok(&["evaluate", "--model", &f.model()]);
    assert!(stdout.contains("NRMSE"));
    let csv = fs::read_to_string(f.out("evaluation.csv")).unwrap();
    let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let r2: f64 = fields[4].parse().unwrap();
    assert!(r2 > 0.5, "{csv}");
    f.ok(&["predict", "--model", &f.model(), "--split", "all"]);
    let preds = fs::read_to_string(f.out("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 601);
    assert!(preds.starts_with("timestamp,forecast,forecast_raw,actual"));
}

#[test]
fn retraining_gives_identical_checksum() {
    let f = Fixture::new();
    f.ok(&["train"]);
    let first = fs::read(f.out("model.json")).unwrap();
    f.ok(&["train"]);
    assert_eq!(first, fs::read(f.out("model.json")).unwrap());
}

#[test]
fn explain_modes_emit_files() {
    let f = Fixture::new();
    f.ok(&["train"]);
    let model = f.model();
    let global = f.ok(&["explain", "--model", &model, "global"]);
    assert!(global.contains("rank") && global.contains("U100"));
    let local = f.ok(&["explain", "--model", &model, "local", "--row", "3"]);
    assert!(local.starts_with("Actual("), "{local}");
    f.ok(&["explain", "--model", &model, "shape", "--feature", "U100"]);
    assert!(fs::read_to_string(f.out("shape_U100.csv")).unwrap().starts_with("bin_center,value\n"));
    f.ok(&["explain", "--model", &model, "heatmap", "--pair", "U100", "V100"]);
    assert!(fs::read_to_string(f.out("heatmap_U100_V100.csv")).unwrap().starts_with("row,col,value\n"));
    f.ok(&["explain", "--model", &model, "pdp", "--feature", "V100"]);
    f.ok(&["explain", "--model", &model, "pfi"]);
    assert_eq!(fs::read_to_string(f.out("pfi.csv")).unwrap().lines().count(), 5);
    let corr = f.ok(&["explain", "--model", &model, "correlations"]);
    assert!(corr.starts_with("variable,U10,V10,U100,V100,target"));
}

#[test]
fn unknown_feature_lists_valid_names() {
    let f = Fixture::new();
    f.ok(&["train"]);
    let out = f.run(&["explain", "--model", &f.model(), "shape", "--feature", "U50"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("U10, V10, U100, V100"), "{err}");
}

#[test]
fn benchmark_over_horizons() {
    let f = Fixture::new();
    let stdout = f.ok(&[
        "benchmark",
        "--set",
        "features.mode=lags",
        "--set",
        "features.n_lags=6",
        "--set",
        "features.horizons=1,4",
    ]);
    assert!(stdout.contains("pm"));
    let csv = fs::read_to_string(f.out("benchmark.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    let first = csv.clone();
    f.ok(&["benchmark", "--set", "features.mode=lags", "--set", "features.n_lags=6", "--set", "features.horizons=1,4"]);
    assert_eq!(first, fs::read_to_string(f.out("benchmark.csv")).unwrap());
    assert!(f.out("benchmark_timing.csv").exists());
}

#[test]
fn exogenous_benchmark_skips_persistence() {
    let f = Fixture::new();
    f.ok(&["benchmark"]);
    let csv = fs::read_to_string(f.out("benchmark.csv")).unwrap();
    assert!(!csv.contains("\npm,"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bad_config_key_is_a_usage_error() {
    let f = Fixture::new();
    let out = f.run(&["train", "--set", "train.speed=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn corrupt_model_is_a_model_error() {
    let f = Fixture::new();
    f.ok(&["train"]);
    let text = fs::read_to_string(f.out("model.json")).unwrap();
    fs::write(f.out("model.json"), &text[..text.len() / 3]).unwrap();
    let out = f.run(&["evaluate", "--model", &f.model()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt model file"));
}

#[test]
fn mismatched_data_is_a_model_error() {
    let f = Fixture::new();
    f.ok(&["train"]);
    let out = f.run(&["evaluate", "--model", &f.model(), "--set", "data.exogenous=U10,V10"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let f = Fixture::new();
    let out = f.run(&["train", "--set", "data.path=/nonexistent/wind.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn persistence_in_exogenous_mode_is_rejected() {
    let f = Fixture::new();
    let out = f.run(&["train", "--set", "model.kind=pm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_matches_library_metrics() {
    use windebm_core::benchmark::clamp_unit;
    use windebm_core::data::{chronological_split, load_csv, CsvSchema, FeatureKind, SplitFractions};
    use windebm_core::metrics::evaluate;
    use windebm_core::persist::load;
    use windebm_core::pipeline::prepare_for_model;

    let f = Fixture::new();
    f.ok(&["train", "--set", "model.kind=lr"]);
    f.ok(&["evaluate", "--model", &f.model()]);
    let csv = fs::read_to_string(f.out("evaluation.csv")).unwrap();
    let fields: Vec<String> = csv.lines().nth(1).unwrap().split(',').map(String::from).collect();

    let model = load(f.out("model.json")).unwrap();
    let frame = load_csv(f.dir.path().join("wind.csv"), &CsvSchema::new("TIMESTAMP", "TARGETVAR")
        .with_exogenous(windebm_core::data::ExogenousColumns::All)).unwrap();
    let data = prepare_for_model(&frame, FeatureKind::Exogenous, model.normalization()).unwrap();
    let split = chronological_split(data.rows(), SplitFractions::default()).unwrap();
    let mut pred = model.predict(&data.x.slice_rows(split.test.clone())).unwrap();
    clamp_unit(&mut pred);
    let r = evaluate(&pred, &data.y[split.test.clone()]).unwrap();
    assert_eq!(fields[2], format!("{:.6}", r.nrmse));
    assert_eq!(fields[3], format!("{:.6}", r.nmae));
    assert_eq!(fields[4], format!("{:.6}", r.r2));
}
