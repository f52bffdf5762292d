use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "\
# small phantom set for quick runs
phantom.size = 64
phantom.count_per_class = 6
cv.k = 3
";

fn mammoscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mammoscope")).args(args).output().expect("spawn mammoscope")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.cfg"), config).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.path("run.cfg");
        let mut all = vec!["--config", s(&cfg)];
        all.extend_from_slice(args);
        mammoscope(&all)
    }

    fn phantoms(&self) -> PathBuf {
        let out = self.path("images");
        let o = self.run(&["phantom", "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    }

    fn features(&self) -> PathBuf {
        let images = self.phantoms();
        let csv = self.path("features.csv");
        let o = self.run(&["extract", "--manifest", s(&images.join("manifest.csv")), "--out", s(&csv)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csv
    }
}

fn single_class(features: &Path, dest: &Path) {
    let text = fs::read_to_string(features).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.contains(",suspicious,")).collect();
    fs::write(dest, kept.join("\n") + "\n").unwrap();
}

#[test]
fn phantom_writes_images_and_manifest() {
    let ws = Workspace::new(SMALL);
    let out = ws.phantoms();
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "path,label");
    assert_eq!(lines.len(), 13);
    for line in &lines[1..] {
        let file = line.split(',').next().unwrap();
        assert!(fs::read(out.join(file)).unwrap().starts_with(b"P5"));
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    let out = dir.path().join("images");
    let o = mammoscope(&["--config", s(&missing), "phantom", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_config_key_is_a_usage_error() {
    let ws = Workspace::new("phantom.sise = 64\n");
    let o = ws.run(&["phantom", "--out", s(&ws.path("images"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sise"));
}

#[test]
fn unwritable_output_dir_is_reported() {
    let ws = Workspace::new(SMALL);
    fs::write(ws.path("blocker"), b"not a directory").unwrap();
    let o = ws.run(&["phantom", "--out", s(&ws.path("blocker").join("images"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocker"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(mammoscope(&["segment"]).status.code(), Some(2));
}

#[test]
fn extract_four_image_manifest() {
    let ws = Workspace::new("phantom.size = 64\nphantom.count_per_class = 2\n");
    let images = ws.phantoms();
    let csv = ws.path("f.csv");
    let o = ws.run(&["extract", "--manifest", s(&images.join("manifest.csv")), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("id,label,wll_mean,"));
    assert!(lines[1].starts_with("phantom_0000_normal.pgm,normal,"));
    assert!(lines[4].starts_with("phantom_0003_suspicious.pgm,suspicious,"));
}

#[test]
fn extract_reports_missing_image_and_exits_1() {
    let ws = Workspace::new("phantom.size = 64\nphantom.count_per_class = 2\n");
    let images = ws.phantoms();
    fs::remove_file(images.join("phantom_0001_normal.pgm")).unwrap();
    let csv = ws.path("f.csv");
    let o = ws.run(&["extract", "--manifest", s(&images.join("manifest.csv")), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phantom_0001_normal.pgm"));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(!text.contains("phantom_0001_normal.pgm"));
}

#[test]
fn extract_missing_manifest_writes_nothing() {
    let ws = Workspace::new(SMALL);
    let csv = ws.path("f.csv");
    let o = ws.run(&["extract", "--manifest", s(&ws.path("none.csv")), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!csv.exists());
}

#[test]
fn extract_is_deterministic_across_runs_and_job_counts() {
    let ws = Workspace::new(SMALL);
    let first = fs::read(ws.features()).unwrap();
    let images = ws.path("images");
    let again = ws.path("again.csv");
    let o = ws.run(&["--jobs", "4", "extract", "--manifest", s(&images.join("manifest.csv")), "--out", s(&again)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, fs::read(&again).unwrap());
}

#[test]
fn train_and_predict_roundtrip() {
    let ws = Workspace::new(SMALL);
    let features = ws.features();
    let model = ws.path("model.nb");
    let o = ws.run(&["train", "--features", s(&features), "--out", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&model).unwrap().starts_with("nbmodel v1\n"));

    let preds = ws.path("preds.csv");
    let o = ws.run(&["predict", "--features", s(&features), "--model", s(&model), "--out", s(&preds)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,score,label");
    assert_eq!(lines.len(), 13);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        let score: f64 = fields[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&score));
        assert!(fields[2] == "normal" || fields[2] == "suspicious");
    }
}

#[test]
fn train_records_selected_features() {
    let ws = Workspace::new(&format!("{SMALL}features.select_k = 3\n"));
    let features = ws.features();
    let model = ws.path("model.nb");
    let o = ws.run(&["train", "--features", s(&features), "--out", s(&model)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&model).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("floor ")).count(), 3);
}

#[test]
fn train_single_class_exits_2_without_output() {
    let ws = Workspace::new(SMALL);
    let features = ws.features();
    let normal_only = ws.path("normal.csv");
    single_class(&features, &normal_only);
    let model = ws.path("model.nb");
    let o = ws.run(&["train", "--features", s(&normal_only), "--out", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!model.exists());
}

#[test]
fn predict_feature_mismatch_exits_2() {
    let ws = Workspace::new(SMALL);
    let features = ws.features();
    let model = ws.path("model.nb");
    assert_eq!(ws.run(&["train", "--features", s(&features), "--out", s(&model)]).status.code(), Some(0));

    let text = fs::read_to_string(&features).unwrap().replace("fft_kurt", "fft_other");
    let renamed = ws.path("renamed.csv");
    fs::write(&renamed, text).unwrap();
    let preds = ws.path("preds.csv");
    let o = ws.run(&["predict", "--features", s(&renamed), "--model", s(&model), "--out", s(&preds)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!preds.exists());
}

#[test]
fn evaluate_reports_metrics_and_writes_roc() {
    let ws = Workspace::new(SMALL);
    let features = ws.features();
    let out_dir = ws.path("eval");
    fs::create_dir(&out_dir).unwrap();
    let o = ws.run(&["evaluate", "--features", s(&features), "--out-dir", s(&out_dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout.clone()).unwrap();
    for key in ["confusion matrix", "sensitivity:", "specificity:", "auc:"] {
        assert!(report.contains(key), "missing {key} in {report}");
    }
    let roc = fs::read_to_string(out_dir.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,fpr,tpr\ninf,0.0,0.0\n"));
    assert!(fs::read_to_string(out_dir.join("roc.svg")).unwrap().contains("<svg"));

    let second = ws.run(&["--jobs", "3", "evaluate", "--features", s(&features), "--out-dir", s(&out_dir)]);
    assert_eq!(o.stdout, second.stdout);
    assert_eq!(roc, fs::read_to_string(out_dir.join("roc.csv")).unwrap());
}

#[test]
fn evaluate_single_class_exits_2() {
    let ws = Workspace::new(SMALL);
    let features = ws.features();
    let normal_only = ws.path("normal.csv");
    single_class(&features, &normal_only);
    let out_dir = ws.path("eval");
    fs::create_dir(&out_dir).unwrap();
    let o = ws.run(&["evaluate", "--features", s(&normal_only), "--out-dir", s(&out_dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out_dir.join("roc.csv").exists());
}
