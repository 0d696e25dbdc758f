use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn tightbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tightbound"))
        .args(args)
        .env_remove("TIGHTBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn lossy_single_photon_violates_click_inequality() {
    let o = tightbound(&["photocount", "--state", "fock:1", "--eta", "0.7", "--detector", "click:2"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["alpha0", "margin", "std_error", "t1", "tau", "detector"]);
    assert_eq!(r.len(), 2);
    assert!(r[1][0].is_empty() && r[1][2].is_empty() && r[1][4].is_empty());
    assert!(r[1][1].parse::<f64>().unwrap() > 0.0);
    assert_eq!(r[1][5], "click:2");
}

#[test]
fn coherent_state_is_classical() {
    let o = tightbound(&["photocount", "--state", "coherent:1.0", "--detector", "pnr:3"]);
    assert_eq!(code(&o), 0);
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["alpha0", "margin", "std_error", "t1", "tau", "detector"]);
    assert!(r[1][1].parse::<f64>().unwrap() <= 1e-9);
}

#[test]
fn scan_writes_one_row_per_point_and_a_matching_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let out_s = out.to_str().unwrap();
    let args = [
        "photocount", "--scan", "alpha0=0:3:61", "--state", "sq-coh", "--r", "0.57", "--eta", "0.7", "--detector",
        "pnr:5", "--samples", "100000", "--seed", "7", "--out", out_s,
    ];
    let o = tightbound(&args);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = fs::read(&out).unwrap();
    let r = rows(std::str::from_utf8(&bytes).unwrap());
    assert_eq!(r[0], ["alpha0", "margin", "std_error", "t1", "t2", "tau", "detector"]);
    assert_eq!(r.len(), 62);
    assert_eq!(r[1][0], "0.0");
    assert_eq!(r[61][0], "3.0");
    assert!(r[1..].iter().all(|row| !row[2].is_empty()));

    let m = manifest(&dir.path().join("scan.csv.manifest.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["command"], "photocount");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["detector"]["n"], 5);
    assert_eq!(m["outputs"][0]["schema"], "tightbound.photocount.v1");
    assert_eq!(m["outputs"][0]["bytes"], bytes.len());
    assert_eq!(m["outputs"][0]["sha256"], hex::encode(Sha256::digest(&bytes)));

    // the same invocation reproduces the file byte for byte
    let o = tightbound(&args);
    assert_eq!(code(&o), 2);
    assert_eq!(fs::read(&out).unwrap(), bytes);
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mf = dir.path().join("m.json");
    let o = Command::new(env!("CARGO_BIN_EXE_tightbound"))
        .args(["photocount", "--state", "coherent:0.5", "--detector", "click:3", "--manifest"])
        .arg(&mf)
        .env("TIGHTBOUND_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let m = manifest(&mf);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["outputs"][0]["path"], "-");
    assert_eq!(m["outputs"][0]["sha256"], hex::encode(Sha256::digest(&o.stdout)));
}

#[test]
fn vacuum_sits_on_the_uhd_boundary() {
    let o = tightbound(&["uhd", "--state", "vacuum"]);
    assert_eq!(code(&o), 0);
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["eta", "P1", "P2", "verdict", "violated_inequality", "t_star"]);
    assert_eq!(r[1][3], "classical");
    assert_eq!(r[1][4], "equality:separation");
    let p1: f64 = r[1][1].parse().unwrap();
    assert!((p1 - (-0.5f64).exp()).abs() < 1e-12);
}

#[test]
fn squeezed_vacuum_uhd_scan_has_a_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("uhd.csv");
    let boundary = dir.path().join("boundary.csv");
    let o = tightbound(&[
        "uhd",
        "--state",
        "sq-vac",
        "--r",
        "0.34",
        "--scan",
        "eta=0.1:1:10",
        "--crossover",
        "--out",
        out.to_str().unwrap(),
        "--boundary",
        boundary.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    let r = rows(&fs::read_to_string(&out).unwrap());
    assert_eq!(r.len(), 11);
    let verdicts: Vec<bool> = r[1..].iter().map(|x| x[3] == "nonclassical").collect();
    assert!(!verdicts[0] && verdicts[9]);
    let first = verdicts.iter().position(|&v| v).unwrap();
    assert!(verdicts[first..].iter().all(|&v| v), "{verdicts:?}");
    assert_eq!(r[10][4], "separation");

    let m = manifest(&dir.path().join("uhd.csv.manifest.json"));
    let star = m["summary"]["crossover_eta"].as_f64().unwrap();
    let lo: f64 = r[first][0].parse().unwrap();
    let hi: f64 = r[first + 1][0].parse().unwrap();
    assert!(lo < star && star <= hi, "{star} not in ({lo}, {hi}]");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    let b = fs::read(&boundary).unwrap();
    assert_eq!(m["outputs"][1]["sha256"], hex::encode(Sha256::digest(&b)));
    assert_eq!(rows(std::str::from_utf8(&b).unwrap())[0], ["t", "P1", "P2"]);
}

#[test]
fn sampled_uhd_verdict_needs_significance() {
    let args = ["uhd", "--state", "sq-vac", "--r", "0.34", "--samples", "1000000", "--seed", "3"];
    let o = tightbound(&args);
    assert_eq!(code(&o), 2);
    assert_eq!(rows(&stdout(&o))[1][3], "nonclassical");
    // a hundred events cannot resolve a margin of this size
    let o = tightbound(&["uhd", "--state", "sq-vac", "--r", "0.34", "--samples", "100", "--seed", "3"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn invalid_flag_combinations_exit_64() {
    for args in [
        &["photocount", "--state", "sq-vac", "--detector", "pnr:3"][..],
        &["photocount", "--state", "coherent:1", "--r", "0.3", "--detector", "pnr:3"],
        &["photocount", "--state", "coherent:1", "--detector", "pnr:4"],
        &["photocount", "--state", "coherent:1", "--detector", "qubit:3"],
        &["photocount", "--state", "fock:1", "--scan", "alpha0=0:1:3", "--detector", "pnr:3"],
        &["photocount", "--state", "coherent:1", "--eta", "1.5", "--detector", "pnr:3"],
        &["uhd", "--state", "vacuum", "--scan", "alpha0=0:1:3"],
        &["uhd", "--state", "vacuum", "--gamma1", "1", "--gamma2", "1"],
        &["oracle-check", "--n", "4"],
        &["photocount"],
    ] {
        let o = tightbound(args);
        assert_eq!(code(&o), 64, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&tightbound(&["--help"])), 0);
}

#[test]
fn oracle_check_agrees_on_small_runs() {
    for n in ["2", "3"] {
        let o = tightbound(&["oracle-check", "--n", n, "--trials", "300", "--seed", "1"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let report: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(report["mode"], "equivalence");
        assert_eq!(report["ok"], true);
        for d in report["detectors"].as_array().unwrap() {
            assert_eq!(d["disagreements"], 0);
            assert!(d["compared"].as_u64().unwrap() > 250);
        }
    }
    let o = tightbound(&["oracle-check", "--n", "5", "--trials", "40", "--detector", "click"]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["mode"], "one-way");
    assert_eq!(report["detectors"].as_array().unwrap().len(), 1);
}
