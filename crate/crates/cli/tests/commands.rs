use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use vibspeech::io::{read_json, write_csv, write_wav, WavFormat};
use vibspeech::signal::SampledSignal;

fn vibspeech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vibspeech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vibspeech(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn single_subject_synthesis_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&[
            "synth",
            "--f0",
            "120",
            "--duration",
            "5",
            "--seed",
            "7",
            "--out",
            path(dir),
        ]);
    }
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    assert_eq!(ta.len(), 5);
    assert_eq!(ta, tb);
    let manifest: Value = serde_json::from_slice(&ta["subject.json"]).unwrap();
    assert_eq!(manifest["glottal"]["f0_hz"], 120.0);
}

#[test]
fn cohort_synthesis_creates_one_directory_per_subject() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cohort");
    ok(&[
        "synth",
        "--cohort",
        "66",
        "--seed",
        "1",
        "--duration",
        "0.2",
        "--out",
        path(&out),
    ]);
    let dirs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(dirs, 66);
    assert!(out.join("subject_066").join("s.wav").is_file());
}

#[test]
fn out_of_range_f0_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vibspeech(&["synth", "--f0", "50", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("f0_hz"));
    assert_eq!(vibspeech(&["synth"]).status.code(), Some(1));
    assert_eq!(
        vibspeech(&["--jobs", "0", "synth", "--out", "x"]).status.code(),
        Some(1)
    );
}

#[test]
fn radar_recovers_displacement_with_and_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = tmp.path().join("clean");
    let noisy = tmp.path().join("noisy");
    for dir in [&clean, &noisy] {
        ok(&[
            "synth",
            "--f0",
            "150",
            "--duration",
            "1",
            "--seed",
            "3",
            "--out",
            path(dir),
        ]);
    }
    let stdout = ok(&["radar", path(&clean)]);
    assert!(stdout.contains("correlation"));
    let diag: Value = serde_json::from_slice(&std::fs::read(clean.join("radar.json")).unwrap()).unwrap();
    assert!(diag["correlation"].as_f64().unwrap() > 0.999);
    assert_eq!(diag["bin"], 6);

    ok(&["radar", "--snr", "20", path(&noisy)]);
    let diag: Value = serde_json::from_slice(&std::fs::read(noisy.join("radar.json")).unwrap()).unwrap();
    let r = diag["correlation"].as_f64().unwrap();
    assert!(r > 0.99 && r < 1.0, "{r}");
    assert_eq!(diag["noise"]["snr_db"], 20.0);
}

#[test]
fn radar_names_missing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    ok(&["synth", "--duration", "0.5", "--out", path(&dir)]);
    std::fs::remove_file(dir.join("d.csv")).unwrap();
    let out = vibspeech(&["radar", path(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d.csv"));
}

#[test]
fn transform_writes_three_signals_and_honours_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    ok(&[
        "synth",
        "--f0",
        "140",
        "--duration",
        "1",
        "--tau-samples",
        "2",
        "--seed",
        "5",
        "--out",
        path(&dir),
    ]);
    ok(&["radar", path(&dir)]);
    ok(&["transform", path(&dir)]);
    for name in ["e_hat.csv", "x_hat.csv", "d_hat.csv", "transform.json"] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    let global: Value = read_json(&dir.join("transform.json")).unwrap();
    assert_eq!(global["config"]["tau_mode"], "global");

    ok(&[
        "transform",
        "--tau-mode",
        "per-frame",
        "--order",
        "4",
        "--known-tract",
        path(&dir),
    ]);
    let per_frame: Value = read_json(&dir.join("transform.json")).unwrap();
    assert_eq!(per_frame["config"]["tau_mode"], "per-frame");
    assert_eq!(per_frame["config"]["lpc_order"], 4);
    assert_eq!(per_frame["config"]["tract"]["kind"], "known");
    assert_eq!(per_frame["global_tau_samples"], 2);

    assert_eq!(
        vibspeech(&["transform", "--tau-mode", "sometimes", path(&dir)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        vibspeech(&["transform", "--order", "0", path(&dir)]).status.code(),
        Some(1)
    );
    assert_eq!(vibspeech(&["transform"]).status.code(), Some(1));
}

#[test]
fn transform_from_files_checks_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s");
    ok(&["synth", "--f0", "200", "--duration", "1", "--out", path(&dir)]);

    // Speech at 8 kHz: every sample repeated four times.
    let speech: SampledSignal = vibspeech::io::read_wav(&dir.join("s.wav")).unwrap();
    let upsampled: Vec<f64> = speech.samples().iter().flat_map(|&v| [v; 4]).collect();
    let fast = tmp.path().join("fast.wav");
    write_wav(
        &fast,
        &SampledSignal::new(upsampled, 8000.0, "s").unwrap(),
        WavFormat::Float32,
    )
    .unwrap();

    let out_dir = tmp.path().join("out");
    let d = dir.join("d.csv");
    let base = [
        "transform",
        "--speech",
        path(&fast),
        "--displacement",
        path(&d),
        "--out",
        path(&out_dir),
    ];
    let mismatch = vibspeech(&base);
    assert_eq!(mismatch.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("rate"));
    let mut resampled = base.to_vec();
    resampled.push("--resample");
    assert!(vibspeech(&resampled).status.success());
    assert!(out_dir.join("d_hat.csv").is_file());
}

#[test]
fn silent_speech_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let silent = SampledSignal::zeros(2000, 2000.0, "s").unwrap();
    let s = tmp.path().join("s.csv");
    let d = tmp.path().join("d.csv");
    write_csv(&s, &silent).unwrap();
    write_csv(&d, &silent).unwrap();
    let out = vibspeech(&[
        "transform",
        "--speech",
        path(&s),
        "--displacement",
        path(&d),
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to transform"));
}

#[test]
fn evaluate_reports_and_leaves_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = tmp.path().join("cohort");
    ok(&[
        "synth",
        "--cohort",
        "4",
        "--duration",
        "0.5",
        "--seed",
        "2",
        "--out",
        path(&cohort),
    ]);
    ok(&["radar", path(&cohort)]);
    ok(&["transform", path(&cohort)]);
    // An incomplete subject is skipped, not fatal.
    std::fs::remove_file(cohort.join("subject_004").join("d_hat.csv")).unwrap();
    let before = tree_bytes(&cohort);

    let reports = tmp.path().join("reports");
    let out = vibspeech(&["evaluate", path(&cohort), "--out", path(&reports)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping subject_004"));
    assert_eq!(tree_bytes(&cohort), before);

    let report: Value = read_json(&reports.join("report.json")).unwrap();
    assert_eq!(report["subjects"].as_array().unwrap().len(), 3);
    assert_eq!(report["skipped"][0]["id"], "subject_004");
    let t_tests = report["t_tests"].as_array().unwrap();
    assert_eq!(t_tests.len(), 2);
    assert_eq!(t_tests[0]["comparison"], "Raw Speech v. Model Filtered");
    let csv = std::fs::read_to_string(reports.join("report.csv")).unwrap();
    assert!(csv.contains("comparison,t_stat,n,std,p_value"));
    let curve = std::fs::read_to_string(reports.join("curves").join("subject_001.csv")).unwrap();
    assert!(curve.starts_with("signal,window,time_s,lsd_db,loess_db\n"));
}

#[test]
fn evaluate_single_subject_and_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("one");
    ok(&["synth", "--duration", "0.5", "--out", path(&dir)]);
    ok(&["transform", path(&dir)]);
    ok(&["evaluate", path(&dir)]);
    let report: Value = read_json(&dir.join("report.json")).unwrap();
    assert!(report["t_tests"].as_array().unwrap().is_empty());
    assert!(report["t_test_note"].is_string());
    assert_eq!(report["descriptive"][0]["n"], 1);

    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(vibspeech(&["evaluate", path(&empty)]).status.code(), Some(2));
}

#[test]
fn config_file_feeds_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 11, "cohort": {"duration_s": 0.5}, "transform": {"lpc_order": 5}}"#,
    )
    .unwrap();
    let dir = tmp.path().join("s");
    ok(&["--config", path(&cfg), "synth", "--out", path(&dir)]);
    let manifest: Value = read_json(&dir.join("subject.json")).unwrap();
    assert_eq!(manifest["duration_s"], 0.5);
    ok(&["transform", "--config", path(&cfg), path(&dir)]);
    let report: Value = read_json(&dir.join("transform.json")).unwrap();
    assert_eq!(report["config"]["lpc_order"], 5);

    std::fs::write(&cfg, r#"{"transfrom": {}}"#).unwrap();
    assert_eq!(
        vibspeech(&["--config", path(&cfg), "synth", "--out", path(&dir)])
            .status
            .code(),
        Some(1)
    );
}
