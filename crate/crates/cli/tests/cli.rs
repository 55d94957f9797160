use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pmqkd::decoy::{decoy_entropy_bound, mixture_gains, DecoySettings, PhotonChannel};
use pmqkd::keyrate::read_keyrate_csv;
use pmqkd::protocol::{b92_preset, SpecDocument};
use pmqkd::tradeoff::TradeoffFunction;
use serde_json::Value;

fn pmqkd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmqkd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PMQKD_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["no-such-command"],
        vec!["keyrate", "--p", "0.02"],
        vec!["keyrate", "--p", "0.02", "--n", "1000", "--preset", "e91"],
        vec!["bound", "--preset", "b92", "--spec", "x.json"],
        vec!["simulate", "--n", "2000000", "--trials", "1"],
        vec!["simulate", "--trials", "0"],
        vec!["--threads", "0", "keyrate", "--p", "0.02", "--n", "1000"],
    ] {
        let out = pmqkd(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmqkd(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("keyrate"));
}

#[test]
fn malformed_spec_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = SpecDocument::from_spec(&b92_preset(0.5).unwrap());
    doc.source[0].prob = 0.7;
    fs::write(dir.path().join("bad.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    let out = pmqkd(&["bound", "--spec", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("source normalization"), "{}", stderr(&out));
}

#[test]
fn bound_caches_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--cache-dir", "cache", "bound", "--p", "0.02", "--out", "a.json"];
    let first = pmqkd(&args, dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(!stderr(&first).contains("cache hit"));
    let second = pmqkd(&["--cache-dir", "cache", "bound", "--p", "0.02", "--out", "b.json"], dir.path());
    assert!(second.status.success());
    assert!(stderr(&second).contains("cache hit"));
    let a = fs::read_to_string(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.json")).unwrap());

    let tf = TradeoffFunction::from_json(&a).unwrap();
    assert_eq!(tf.labels, ["fail", "inc", "∅", "⊥"]);
    assert_eq!(tf.lambda[3], 0.0);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.json.report.json")).unwrap()).unwrap();
    assert!(report["gap"].as_f64().unwrap() <= 1e-3);
    assert!(report["certified_lower"].as_f64().unwrap() <= report["upper_value"].as_f64().unwrap());

    // a different seed is a different cache entry
    let third = pmqkd(&["--cache-dir", "cache", "--seed", "1", "bound", "--p", "0.02"], dir.path());
    assert!(third.status.success());
    assert!(!stderr(&third).contains("cache hit"));
}

#[test]
fn bound_accepts_statistics_file() {
    let dir = tempfile::tempdir().unwrap();
    let stats = r#"{"labels": ["⊥", "∅", "inc", "fail"], "probs": [0.5, 0.1, 0.39, 0.01]}"#;
    fs::write(dir.path().join("stats.json"), stats).unwrap();
    let out = pmqkd(&["bound", "--stats", "stats.json", "--out", "tf.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let missing = r#"{"labels": ["⊥", "∅"], "probs": [0.5, 0.5]}"#;
    fs::write(dir.path().join("short.json"), missing).unwrap();
    let out = pmqkd(&["bound", "--stats", "short.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn keyrate_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmqkd(&["keyrate", "--p", "0.02", "--n", "10000000", "--out", "rates.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_keyrate_csv(fs::File::open(dir.path().join("rates.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].n, "asymptotic");
    assert_eq!(rows[1].n, "10000000");
    let asym: f64 = rows[0].rate.parse().unwrap();
    let finite: f64 = rows[1].rate.parse().unwrap();
    assert!(finite > 0.0 && finite < asym);

    // a config file gives the same CSV
    let cfg = r#"{"p": [0.02], "n": [10000000], "output": "from_config.csv"}"#;
    fs::write(dir.path().join("sweep.json"), cfg).unwrap();
    let out = pmqkd(&["keyrate", "--config", "sweep.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(dir.path().join("rates.csv")).unwrap(),
        fs::read_to_string(dir.path().join("from_config.csv")).unwrap()
    );

    let bad = r#"{"p": [0.02], "n": [1000], "colour": "red"}"#;
    fs::write(dir.path().join("bad.json"), bad).unwrap();
    assert_eq!(pmqkd(&["keyrate", "--config", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "simulate", "--n", "2000", "--trials", "20", "--key-length", "16"];
    let a = pmqkd(&args, dir.path());
    let b = pmqkd(&args, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["result"]["trials"], 20);
    assert_eq!(v["key_length"], 16);
    assert_eq!(v["result"]["correctness_violations"], 0);
}

#[test]
fn decoy_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let settings = DecoySettings::new([0.4, 0.1, 0.007], [0.5, 0.25, 0.25], 0.5).unwrap();
    let gains = mixture_gains(&PhotonChannel::lossy(0.1, 1e-6, 0.01), &settings).unwrap();
    let mut csv = String::from("basis,intensity,t,f\n");
    for (name, g) in [("Z", &gains.z), ("X", &gains.x)] {
        for i in 0..3 {
            csv += &format!("{name},{:?},{:?},{:?}\n", settings.mu[i], g.t[i], g.f[i]);
        }
    }
    fs::write(dir.path().join("gains.csv"), csv).unwrap();
    let out = pmqkd(&["decoy", "--gains", "gains.csv", "--mu", "0.4,0.1,0.007", "--p-mu", "0.5,0.25,0.25"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["entropy_bound"].as_f64().unwrap(), decoy_entropy_bound(&gains, &settings));

    fs::write(dir.path().join("settings.json"), serde_json::to_string(&settings).unwrap()).unwrap();
    let out2 = pmqkd(&["decoy", "--gains", "gains.csv", "--settings", "settings.json"], dir.path());
    assert_eq!(out.stdout, out2.stdout);

    let bad = pmqkd(&["decoy", "--gains", "gains.csv", "--mu", "0.1,0.4,0.007", "--p-mu", "0.5,0.25,0.25"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}
