use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use igb_lab::config::ExperimentConfig;
use igb_lab::csvlog::CSV_HEADER;
use igb_lab::data::{encode_idx_labels, IdxImages};
use igb_lab::losses::LossSpec;

fn igb_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igb-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, epochs: usize, loss: LossSpec) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::preset("ce-paper").unwrap();
    if let igb_lab::config::DataSource::Blobs(b) = &mut cfg.data {
        b.num_classes = 3;
        b.samples_per_class = 10;
        b.input_dim = 4;
    }
    cfg.model.input_dim = 4;
    cfg.model.num_classes = 3;
    cfg.model.depth = 2;
    cfg.model.hidden_width = 8;
    // 30 samples, 0.2 held out: 24 training rows, 3 batches of 8
    cfg.train.batch_size = 8;
    cfg.train.epochs = epochs;
    cfg.train.loss = loss;
    let path = dir.join("cfg.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn svg_ok(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    roxmltree::Document::parse(&text).unwrap();
    assert!(!text.contains("href"));
}

#[test]
fn train_writes_schema_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2, LossSpec::PiecewiseZero { cutoff: 0.1 });
    let out = dir.path().to_str().unwrap();
    let res = igb_lab(&["train", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("train_pz.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    // init + 3 batch records + 1 epoch record, 3 classes each
    assert_eq!(lines.count(), 5 * 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("init,0,,0,0,"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",PZ,,0.1,0"));
    svg_ok(&dir.path().join("train_pz_mean_prob.svg"));
    svg_ok(&dir.path().join("train_pz_accuracy.svg"));
    assert!(dir.path().join("train_pz_model.bin").exists());
}

#[test]
fn seed_flag_changes_model_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1, LossSpec::CrossEntropy);
    let out = dir.path().to_str().unwrap();
    assert!(igb_lab(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "42",
        "--out",
        out
    ])
    .status
    .success());
    let csv = fs::read_to_string(dir.path().join("train_ce.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",CE,,,42")));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = small_config(d.path(), 3, LossSpec::Blurry { gamma: 0.7 });
        let res = igb_lab(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    for f in [
        "train_bl.csv",
        "train_bl_mean_prob.svg",
        "train_bl_model.bin",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn missing_output_directory_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let res = igb_lab(&[
        "init-bias",
        "--preset",
        "ce-paper",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(!missing.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        igb_lab(&["train", "--preset", "nonsense", "--out", out])
            .status
            .code(),
        Some(2)
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"model\": 1}").unwrap();
    assert_eq!(
        igb_lab(&["train", "--config", bad.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(igb_lab(&["train", "--out", out]).status.code(), Some(2));
}

#[test]
fn numeric_failure_keeps_complete_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_config(dir.path(), 3, LossSpec::CrossEntropy);
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    cfg.train.learning_rate = 1e300;
    fs::write(&path, cfg.to_json()).unwrap();
    let res = igb_lab(&[
        "train",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4));
    let csv = fs::read_to_string(dir.path().join("train_ce.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert!(rows >= 3 && rows.is_multiple_of(3), "{rows} rows");
    assert!(!dir.path().join("train_ce_mean_prob.svg").exists());
}

#[test]
fn init_bias_reports_and_draws() {
    let dir = tempfile::tempdir().unwrap();
    let res = igb_lab(&[
        "init-bias",
        "--preset",
        "igb-probe",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("favoured class"), "{stdout}");
    svg_ok(&dir.path().join("init_bias.svg"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("init_bias.json")).unwrap())
            .unwrap();
    let share = report["favoured_share"].as_f64().unwrap();
    assert!(share > 0.1);
}

#[test]
fn init_bias_shallow_zeroish_model_is_near_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset("ce-paper").unwrap();
    cfg.model.depth = 0;
    if let igb_lab::config::DataSource::Blobs(b) = &mut cfg.data {
        // tiny inputs keep a linear model's logits close to zero
        b.center_scale = 1e-6;
        b.noise_std = 1e-6;
    }
    let report = igb_lab::cli::cmd_init_bias(&cfg, dir.path()).unwrap();
    for p in report.overall_mean_probs {
        assert!((p - 0.1).abs() < 1e-3);
    }
}

#[test]
fn grad_check_command() {
    let res = igb_lab(&["grad-check", "--loss", "ce,bl,pz", "--trials", "100"]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().all(|l| l.ends_with("[ok]")));
    assert!(stdout.contains("excluded near cutoff"));
    assert_eq!(
        igb_lab(&["grad-check", "--trials", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn plot_replays_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2, LossSpec::CrossEntropy);
    let out = dir.path().to_str().unwrap();
    assert!(
        igb_lab(&["train", "--config", cfg.to_str().unwrap(), "--out", out])
            .status
            .success()
    );
    let plots = dir.path().join("plots");
    fs::create_dir(&plots).unwrap();
    let csv = dir.path().join("train_ce.csv");
    let res = igb_lab(&[
        "plot",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
        "--prob-column",
        "overall",
    ]);
    assert!(res.status.success());
    let svg = fs::read_to_string(plots.join("train_ce_mean_prob.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let series = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("series"))
        .count();
    assert_eq!(series, 3);
}

#[test]
fn train_from_idx_files() {
    let dir = tempfile::tempdir().unwrap();
    let n = 20;
    let pixels: Vec<u8> = (0..n * 4).map(|i| ((i * 37) % 256) as u8).collect();
    let images = IdxImages {
        count: n,
        rows: 2,
        cols: 2,
        pixels,
    }
    .encode();
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    fs::write(dir.path().join("images.idx"), images).unwrap();
    fs::write(dir.path().join("labels.idx"), encode_idx_labels(&labels)).unwrap();
    let cfg = format!(
        r#"{{
        "model": {{"input_dim": 4, "hidden_width": 4, "depth": 1, "num_classes": 2, "seed": 3}},
        "train": {{"batch_size": 4, "learning_rate": 0.05, "epochs": 2, "loss": {{"kind": "ce"}}, "shuffle_seed": 1}},
        "data": {{"source": "idx", "images": "{0}/images.idx", "labels": "{0}/labels.idx"}},
        "plots": false
    }}"#,
        dir.path().display()
    );
    let path = dir.path().join("idx.json");
    fs::write(&path, cfg).unwrap();
    let res = igb_lab(&[
        "train",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(!dir.path().join("train_ce_mean_prob.svg").exists());
    // wrong magic in the image file is a format error
    fs::write(dir.path().join("images.idx"), encode_idx_labels(&labels)).unwrap();
    let res = igb_lab(&[
        "train",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("0x00000801"));
}
