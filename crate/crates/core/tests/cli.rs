use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn reftomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reftomo"))
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn paths_counts_candidates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for (file, n) in [("triangle.topo", 5), ("path3.topo", 2)] {
        let o = reftomo(&[
            "paths",
            "--topology",
            data(file).to_str().unwrap(),
            "--out",
            out,
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("candidates: {n}")));
        let listing = fs::read_to_string(tmp.path().join("candidates.txt")).unwrap();
        assert_eq!(listing.lines().count(), n);
    }
}

#[test]
fn malformed_topology_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let topo = tmp.path().join("bad.topo");
    fs::write(&topo, "transceiver s\nlink s a\nlink a a\n").unwrap();
    let o = reftomo(&[
        "paths",
        "--topology",
        topo.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn bad_flags_exit_2() {
    let topo = data("triangle.topo");
    let topo = topo.to_str().unwrap();
    for args in [
        vec!["build", "--topology", topo, "--algorithm", "magic"],
        vec!["simulate", "--topology", topo, "--declare", "top3"],
        vec!["simulate", "--topology", topo, "--xb", "1,2", "--k", "1,2"],
        vec!["simulate", "--topology", topo, "--sweep", "alpha=1"],
        vec!["simulate", "--topology", topo, "--trials", "0"],
        vec!["simulate", "--xb", "1000"],
    ] {
        assert_eq!(reftomo(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn build_triangle_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = reftomo(&[
        "build",
        "--topology",
        data("triangle.topo").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("matrix.csv")).unwrap();
    assert_eq!(csv, "e1,e2,e3\n1,1,1\n2,0,0\n0,0,2\n");
    let report = json(&tmp.path().join("report.json"));
    assert_eq!(report["algorithm"], "proposed");
    assert_eq!(report["terminated"], "success");
    assert_eq!(report["interval_factor"], 3);
    assert_eq!(report["traffic_factor"], 7);
    assert!((report["mu"].as_f64().unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    assert_eq!(report["selected"][0]["kind"], "LP");
    let manifest = json(&tmp.path().join("run-manifest.json"));
    assert_eq!(manifest["command"], "build");
    assert_eq!(manifest["config"]["algorithm"], "proposed");
}

#[test]
fn greedy_guard_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = reftomo(&[
        "build",
        "--topology",
        data("demo8.topo").to_str().unwrap(),
        "--algorithm",
        "greedy-fp",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("limit"));
}

#[test]
fn exhausted_build_exits_1() {
    // the cycle behind the bridge a-b leaves b-c and c-d parallel
    let tmp = tempfile::tempdir().unwrap();
    let topo = tmp.path().join("t.topo");
    fs::write(
        &topo,
        "transceiver s\nlink s a\nlink a b\nlink b c\nlink c d\nlink d b\n",
    )
    .unwrap();
    let o = reftomo(&[
        "build",
        "--topology",
        topo.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        json(&tmp.path().join("report.json"))["terminated"],
        "exhausted"
    );
}

#[test]
fn simulate_writes_sweep_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = reftomo(&[
        "simulate",
        "--topology",
        data("demo8.topo").to_str().unwrap(),
        "--sweep",
        "k=1,2,3",
        "--xb",
        "1000",
        "--trials",
        "300",
        "--seed",
        "7",
        "--trial-log",
        "--out",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sweep_axis,value,detection_ratio,trials,seed");
    assert_eq!(lines.len(), 4);
    let k1: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!(k1 >= 0.99);
    let log = fs::read_to_string(tmp.path().join("trials.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 900);
}

#[test]
fn simulate_from_matrix_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let matrix = tmp.path().join("m.csv");
    fs::write(&matrix, "e1,e2,e3\n1,1,1\n2,0,0\n0,0,2\n").unwrap();
    let o = reftomo(&[
        "simulate",
        "--matrix",
        matrix.to_str().unwrap(),
        "--xb",
        "100,1000",
        "--sigma",
        "0",
        "--trials",
        "50",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("o/results.csv")).unwrap();
    assert_eq!(
        csv,
        "sweep_axis,value,detection_ratio,trials,seed\nxb,100,1,50,0\nxb,1000,1,50,0\n"
    );
}
