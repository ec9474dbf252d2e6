use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use vibediag::hybrid::ExampleSet;
use vibediag::signal::{load_recording, FaultLabel};

fn vibediag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vibediag"))
        .args(args)
        .env_remove("VIBEDIAG_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = vibediag(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

fn check_artifacts(dir: &Path) {
    let m = manifest(dir);
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let bytes = fs::read(dir.join(a["path"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(a["sha256"].as_str().unwrap(), hex);
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn simulate_is_reproducible_from_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    ok(&["--seed", "11", "simulate", "--out", s(&a), "--duration", "0.3"]);
    ok(&["--seed", "11", "simulate", "--out", s(&b), "--duration", "0.3"]);
    ok(&["--seed", "12", "simulate", "--out", s(&c), "--duration", "0.3"]);
    let ma = manifest(&a);
    assert_eq!(ma["artifacts"], manifest(&b)["artifacts"]);
    assert_ne!(ma["artifacts"], manifest(&c)["artifacts"]);
    assert_eq!(ma["seed"], 11);
    // a csv and a sidecar per class
    assert_eq!(ma["artifacts"].as_array().unwrap().len(), 2 * FaultLabel::COUNT);
    check_artifacts(&a);

    // the environment variable stands in for the flag; the flag wins
    let d = tmp.path().join("d");
    let out = Command::new(env!("CARGO_BIN_EXE_vibediag"))
        .args(["simulate", "--out", s(&d), "--duration", "0.3"])
        .env("VIBEDIAG_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(&d)["artifacts"], ma["artifacts"]);
    let e = tmp.path().join("e");
    let out = Command::new(env!("CARGO_BIN_EXE_vibediag"))
        .args(["--seed", "12", "simulate", "--out", s(&e), "--duration", "0.3"])
        .env("VIBEDIAG_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(&e)["artifacts"], manifest(&c)["artifacts"]);
}

#[test]
fn config_file_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"seed": 4, "simulate": {"duration_s": 0.25}}"#).unwrap();
    let out = tmp.path().join("rec");
    ok(&["--config", s(&cfg), "simulate", "--out", s(&out)]);
    let m = manifest(&out);
    assert_eq!(m["seed"], 4);
    assert_eq!(m["config"]["simulate"]["duration_s"], 0.25);
    assert_eq!(m["config"]["train"]["seed"], 4);
    let name = m["artifacts"][0]["path"].as_str().unwrap();
    let rec = load_recording(&out.join(name.replace(".meta.json", ".csv"))).unwrap();
    assert_eq!(rec.len(), (0.25 * vibediag::RIG_SAMPLE_RATE_HZ).round() as usize);

    fs::write(&cfg, r#"{"simulate": {"seconds": 1}}"#).unwrap();
    assert_eq!(vibediag(&["--config", s(&cfg), "simulate", "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn full_pipeline_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);
    ok(&["--seed", "2", "simulate", "--out", s(&p("rec")), "--duration", "0.75"]);
    let text = ok(&["featurize", "--input", s(&p("rec")), "--out", s(&p("ds")), "--channels", "1", "--jobs", "2"]);
    assert!(text.contains("examples from 5 recordings"), "{text}");
    check_artifacts(&p("ds"));

    // training refuses a dataset without a split
    let out = vibediag(&["train", "--dataset", s(&p("ds")), "--out", s(&p("m0")), "--branch", "mlp"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);

    let table = ok(&["split", "--dataset", s(&p("ds")), "--out", s(&p("split")), "--stratified"]);
    assert!(table.contains("Total"));
    let set = ExampleSet::load(&p("split")).unwrap();
    let sp = set.split.as_ref().unwrap();
    assert_eq!(sp.train.len() + sp.val.len() + sp.test.len(), set.len());
    assert!(set.scaler.is_some());

    ok(&["--seed", "5", "train", "--dataset", s(&p("split")), "--out", s(&p("model")), "--branch", "mlp", "--epochs", "4", "--lr", "0.01"]);
    let history = fs::read_to_string(p("model").join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n"));
    assert_eq!(history.lines().count(), 5);
    check_artifacts(&p("model"));

    ok(&["eval", "--dataset", s(&p("split")), "--model", s(&p("model")), "--out", s(&p("eval")), "--subset", "test"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(p("eval").join("report.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        for key in ["class", "precision", "recall", "f1", "support"] {
            assert!(!r[key].is_null(), "missing {key}");
        }
    }
    let support: u64 = rows.iter().map(|r| r["support"].as_u64().unwrap()).sum();
    assert_eq!(support as usize, sp.test.len());
    let confusion = fs::read_to_string(p("eval").join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 6);
    assert!(confusion.starts_with("true\\predicted,Normal,InnerRace,OuterRace,Ball,Combined"));
    assert_eq!(fs::read_to_string(p("eval").join("report.txt")).unwrap().lines().count(), 7);

    ok(&["export-images", "--dataset", s(&p("split")), "--out", s(&p("img"))]);
    let pgm = fs::read_dir(p("img"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(pgm, set.len());

    ok(&["embed", "--dataset", s(&p("split")), "--out", s(&p("emb")), "--iterations", "260", "--perplexity", "5"]);
    let emb = fs::read_to_string(p("emb").join("embedding.csv")).unwrap();
    assert!(emb.starts_with("id,x,y,label\n"));
    assert_eq!(emb.lines().count(), set.len() + 1);
    assert!(fs::read_to_string(p("emb").join("variance.csv")).unwrap().starts_with("k,cumulative_ratio\n"));

    let rec = fs::read_dir(p("rec"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|x| x.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    ok(&["srs", "--input", s(&rec), "--out", s(&p("srs"))]);
    let srs: Value = serde_json::from_str(&fs::read_to_string(p("srs").join("srs.json")).unwrap()).unwrap();
    let peaks: Vec<f64> = srs["peaks_hz"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(peaks.len(), 2);
    assert!((peaks[0] - 240.0).abs() < 5.0 && (peaks[1] - 820.0).abs() < 5.0, "{peaks:?}");
}

#[test]
fn import_reads_delimited_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("bench_run.txt");
    let mut text = String::from("time;ax;ay;alpha\n");
    for i in 0..50 {
        text.push_str(&format!("{};{};{};{}\n", i as f64 * 1e-3, i as f64, -(i as f64), 0.5 * i as f64));
    }
    fs::write(&src, text).unwrap();
    let out = tmp.path().join("imp");
    ok(&[
        "import", "--input", s(&src), "--out", s(&out), "--label", "OuterRace", "--sample-rate", "1000",
        "--linear-column", "1", "2", "--angular-column", "3", "--delimiter", ";",
    ]);
    let rec = load_recording(&out.join("bench_run.csv")).unwrap();
    assert_eq!(rec.label, FaultLabel::OuterRace);
    assert_eq!(rec.sample_rate_hz, 1000.0);
    assert_eq!(rec.linear.len(), 2);
    assert_eq!(rec.linear[1][7], -7.0);
    assert_eq!(rec.angular[49], 24.5);

    // a column that is not there is a stage failure, a missing flag a usage error
    let bad = vibediag(&["import", "--input", s(&src), "--out", s(&out), "--label", "Ball", "--linear-column", "9", "--angular-column", "3", "--delimiter", ";"]);
    assert_eq!(bad.status.code(), Some(1));
    let usage = vibediag(&["import", "--input", s(&src), "--out", s(&out), "--label", "Ball"]);
    assert_eq!(usage.status.code(), Some(2));
}
