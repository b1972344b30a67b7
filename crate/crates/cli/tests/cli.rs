use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cgssl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgssl")).args(args).env_remove("CGSSL_SEED").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cgssl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn column(p: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(p).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[i].to_string()).collect()
}

const TRAIN: &str = r#"{"framework":"gbt","augmentation_1":{"kind":"drop_edge","p":0.3},"augmentation_2":{"kind":"drop_edge","p":0.3},
"encoder":{"dims":[60,8],"proj_dim":8},"loss":{"kind":"barlow_twins","lambda":0.005},"epochs":5,"lr":0.005,"spectrum_logging":true}"#;

fn sbm(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("g");
    ok(&["gen", "--family", "sbm", "--blocks", "30,30", "--p-in", "0.2", "--p-out", "0.02", "--seed", "3", "--out", s(&out)]);
    out.join("graph.json")
}

#[test]
fn usage_errors_exit_two_with_one_json_line() {
    let t = tempfile::tempdir().unwrap();
    for args in [
        vec!["bounds", "--bogus"],
        vec!["spectrum", "--in", "/nonexistent/graph.json", "--out", s(t.path())],
        vec!["verify", "--lemma", "9"],
        vec!["bounds", "--preset", "nope"],
    ] {
        let out = cgssl(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        if args[1] != "--bogus" {
            assert_eq!(err.trim().lines().count(), 1);
            let v: Value = serde_json::from_str(err.trim()).unwrap();
            assert_eq!(v["exit"], 2);
        }
    }
    let cfg = t.path().join("bad.json");
    fs::write(&cfg, r#"{"framework":"grace"}"#).unwrap();
    let out = cgssl(&["train", "--config", s(&cfg), "--data", s(&cfg), "--out", s(t.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let t = tempfile::tempdir().unwrap();
    let file = t.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let out = cgssl(&["bounds", "--preset", "appendix-d", "--out", s(&file.join("sub"))]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["exit"], 1);
}

#[test]
fn bounds_preset() {
    let t = tempfile::tempdir().unwrap();
    let stdout = ok(&["bounds", "--preset", "appendix-d", "--out", s(t.path())]);
    assert!(stdout.starts_with("lower=4.79"));
    let lower: f64 = column(&t.path().join("bounds.csv"), "lower")[0].parse().unwrap();
    let upper: f64 = column(&t.path().join("bounds.csv"), "upper")[0].parse().unwrap();
    assert!((lower - 4.7989).abs() < 1e-2 && (upper - 5.4497).abs() < 1e-2);
    let run = json(&t.path().join("run.json"));
    assert_eq!(run["tool"], "cgssl");
    assert!(run["version"].is_string());
    ok(&["bounds", "--preset", "appendix-d", "--sweep", "delta=0,0.1,0.2", "--out", s(t.path())]);
    let uppers: Vec<f64> = column(&t.path().join("bounds.csv"), "upper").iter().map(|v| v.parse().unwrap()).collect();
    assert!(uppers.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn two_node_spectrum() {
    let t = tempfile::tempdir().unwrap();
    let g = t.path().join("k2.json");
    fs::write(&g, r#"{"n":2,"edges":[[0,1]],"features":[[1],[1]]}"#).unwrap();
    ok(&["spectrum", "--in", s(&g), "--out", s(t.path())]);
    let vals: Vec<f64> = column(&t.path().join("spectrum.csv"), "eigenvalue").iter().map(|v| v.parse().unwrap()).collect();
    assert!(vals[0].abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
}

#[test]
fn lemma_four_report() {
    let t = tempfile::tempdir().unwrap();
    ok(&["verify", "--lemma", "4", "--trials", "100", "--n", "40", "--delta", "0.2", "--out", s(t.path())]);
    let r = json(&t.path().join("verify.json"));
    assert_eq!(r["passes"], 100);
    assert_eq!(r["trials"], 100);
}

#[test]
fn seed_env_fallback() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["gen", "--family", "er", "--n", "20", "--p", "0.2", "--seed", "5", "--out", s(&a)]);
    let out = Command::new(env!("CARGO_BIN_EXE_cgssl"))
        .args(["gen", "--family", "er", "--n", "20", "--p", "0.2", "--out", s(&b)])
        .env("CGSSL_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(a.join("graph.json")).unwrap(), fs::read(b.join("graph.json")).unwrap());
}

#[test]
fn augment_keeps_input_and_reproduces() {
    let t = tempfile::tempdir().unwrap();
    let g = sbm(t.path());
    let before = fs::read(&g).unwrap();
    let spec = r#"{"kind":"drop_edge","p":0.4}"#;
    for d in ["a1", "a2"] {
        ok(&["augment", "--in", s(&g), "--out", s(&t.path().join(d)), "--spec", spec, "--samples", "3", "--spectra", "--seed", "2"]);
    }
    assert_eq!(fs::read(&g).unwrap(), before);
    for f in ["spectra.csv", "mean_spectrum.csv", "view_002.json"] {
        assert_eq!(fs::read(t.path().join("a1").join(f)).unwrap(), fs::read(t.path().join("a2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_probe_report_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let g = sbm(t.path());
    let cfg = t.path().join("train.json");
    fs::write(&cfg, TRAIN).unwrap();
    let runs: Vec<_> = [(1, "r1"), (2, "r2"), (1, "r1b")]
        .iter()
        .map(|&(seed, name)| {
            let d = t.path().join(name);
            ok(&["train", "--config", s(&cfg), "--data", s(&g), "--seed", &seed.to_string(), "--out", s(&d)]);
            d
        })
        .collect();
    assert_eq!(fs::read(runs[0].join("metrics.csv")).unwrap(), fs::read(runs[2].join("metrics.csv")).unwrap());
    assert_eq!(fs::read(runs[0].join("spectra/epoch_0004.csv")).unwrap(), fs::read(runs[2].join("spectra/epoch_0004.csv")).unwrap());
    let summary = json(&runs[0].join("summary.json"));
    assert!(summary["og_aug"].is_number());

    ok(&["probe", "--data", s(&g), "--run", s(&runs[0]), "--out", s(&t.path().join("p"))]);
    let probe = json(&t.path().join("p/probe.json"));
    assert_eq!(probe["trained"]["test_accuracy"], summary["test_accuracy"]);

    let single = t.path().join("rep1");
    ok(&["report", "--runs", s(&runs[0]), "--out", s(&single)]);
    let losses = column(&runs[0].join("metrics.csv"), "loss");
    assert_eq!(column(&single.join("report.csv"), "final_loss_mean"), vec![losses.last().unwrap().clone()]);
    assert_eq!(column(&single.join("report.csv"), "final_loss_std"), vec![String::new()]);

    let both = t.path().join("rep2");
    let missing = t.path().join("missing");
    let out = cgssl(&["report", "--runs", s(&runs[0]), s(&runs[1]), s(&missing), "--out", s(&both)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
    let std = column(&both.join("report.csv"), "final_loss_std");
    assert_eq!(std.len(), 1);
    assert!(std[0].parse::<f64>().unwrap() >= 0.0);
    assert!(both.join("spectra_0.svg").exists());
}

#[test]
fn sweep_analyze_and_report_curve() {
    let t = tempfile::tempdir().unwrap();
    let g = sbm(t.path());
    let cfg = t.path().join("sweep.json");
    let mut v: Value = serde_json::from_str(TRAIN).unwrap();
    v["data"] = Value::String(s(&g).into());
    v["drop_p"] = serde_json::json!([0.1, 0.3, 0.5, 0.7]);
    v["seeds"] = serde_json::json!([0, 1]);
    fs::write(&cfg, v.to_string()).unwrap();
    let sw = t.path().join("sw");
    ok(&["sweep", "--config", s(&cfg), "--out", s(&sw), "--jobs", "2"]);
    let csv = sw.join("sweep.csv");
    assert_eq!(column(&csv, "p").len(), 8);
    ok(&["analyze", "--in", s(&csv), "--out", s(&t.path().join("an"))]);
    assert_eq!(column(&t.path().join("an/polynomial.csv"), "model").len(), 6);
    assert!(!column(&t.path().join("an/iv2sls.csv"), "model").is_empty());

    let rep = t.path().join("rep");
    ok(&["report", "--runs", s(&sw), "--out", s(&rep)]);
    let params: Vec<f64> = column(&rep.join("report.csv"), "param").iter().map(|x| x.parse().unwrap()).collect();
    let means: Vec<f64> = column(&rep.join("report.csv"), "accuracy_mean").iter().map(|x| x.parse().unwrap()).collect();
    let ps: Vec<f64> = column(&csv, "p").iter().map(|x| x.parse().unwrap()).collect();
    let acc: Vec<f64> = column(&csv, "accuracy").iter().map(|x| x.parse().unwrap()).collect();
    for (p, m) in params.iter().zip(&means) {
        let runs: Vec<f64> = ps.iter().zip(&acc).filter(|(q, _)| *q == p).map(|(_, a)| *a).collect();
        let want = runs.iter().sum::<f64>() / runs.len() as f64;
        assert!((m - want).abs() < 1e-12);
    }
    assert!(rep.join("accuracy.svg").exists());

    let again = t.path().join("sw2");
    ok(&["sweep", "--config", s(&cfg), "--out", s(&again)]);
    assert_eq!(fs::read(&csv).unwrap(), fs::read(again.join("sweep.csv")).unwrap());
}

#[test]
fn bench_writes_slope() {
    let t = tempfile::tempdir().unwrap();
    ok(&["bench", "--n", "50,100,200", "--repeats", "3", "--out", s(t.path())]);
    assert_eq!(column(&t.path().join("timing.csv"), "method").len(), 9);
    assert!(json(&t.path().join("bench.json"))["spectrum_slope"].is_number());
}
