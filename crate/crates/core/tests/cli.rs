use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bergman-fk"));
    c.env_remove("BERGMAN_FK_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn csv_rows(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    (header, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn phi_table_matches_closed_form() {
    let out = run(&["phi", "--n", "3", "--grid", "0:0.99:0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 100);
    let d = column(&header, "diff");
    let max = rows.iter().map(|r| r[d].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(max < 1e-10, "max diff {max}");
}

#[test]
fn phi_single_points() {
    let (header, rows) = csv_rows(&run(&["phi", "--n", "2", "--grid", "0.5"]));
    let get = |name| rows[0][column(&header, name)].parse::<f64>().unwrap();
    assert_eq!((get("r"), get("value"), get("oracle"), get("diff")), (0.5, 0.75, 0.75, 0.0));

    let (header, rows) = csv_rows(&run(&["phi", "--n", "4", "--grid", "0.5"]));
    let v: f64 = rows[0][column(&header, "value")].parse().unwrap();
    assert!((v - 0.289950).abs() < 5e-7);
    // 17 significant digits in scientific notation
    assert_eq!(rows[0][column(&header, "value")], "2.8995016448994138e-1");
}

#[test]
fn certify_all_passes() {
    let out = run(&["certify", "all", "--n", "3", "--alpha", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    for key in ["config", "results", "failures", "timing"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
    assert!(v["timing"].is_null());
}

#[test]
fn concentrate_one_on_centered_ball() {
    let out = run(&["concentrate", "--f", "one", "--omega", "ball:s=12.566", "--n", "2", "--alpha", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json(&out)["results"]["rows"][0];
    let (value, stderr) = (row["value"].as_f64().unwrap(), row["stderr"].as_f64().unwrap());
    assert!((value - 0.5).abs() < 1e-4, "{value}");
    assert_eq!(stderr, 0.0);
    // θ₂(s) = 1 − 4π/(4π + s) at α = 2
    let exact = 1.0 - 4.0 * std::f64::consts::PI / (4.0 * std::f64::consts::PI + 12.566);
    assert!((value - exact).abs() < 1e-9);
}

#[test]
fn wavelet_witness_is_negative() {
    let out = run(&["wavelet", "witness", "--n", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json(&out)["results"]["rows"][0];
    assert!(row["laplacian"].as_f64().unwrap() < 0.0);
    assert!(row["y1"].as_f64().unwrap() > 0.0 && row["t"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["bogus"][..],
        &["phi", "--n", "0"],
        &["phi", "--grid", "1:0:0.1"],
        &["theta", "--alpha", "0.5"],
        &["concentrate", "--f", "nonsense", "--omega", "ball:s=1"],
        &["concentrate", "--f", "one", "--omega", "ball:s=-1"],
        &["fuzz", "--samples", "0"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn check_failure_exits_1() {
    // a 16-term series cannot converge at r = 0.9
    let out = run(&["phi", "--n", "5", "--grid", "0.9", "--series-max-terms", "16"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(report["failures"][0].as_str().unwrap().contains("16 terms"), "{report}");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fuzz.json");
    let mut files = Vec::new();
    for _ in 0..2 {
        let out = run(&[
            "fuzz", "--n", "2", "--trials", "6", "--equality-trials", "2", "--samples", "4000", "--seed", "7",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.code().is_some());
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    run(&[
        "fuzz", "--n", "2", "--trials", "6", "--equality-trials", "2", "--samples", "4000", "--seed", "8",
        "--out", path.to_str().unwrap(),
    ]);
    assert_ne!(files[0], std::fs::read(&path).unwrap());
}

fn config_n(out: &Output) -> u64 {
    json(out)["config"]["n"].as_u64().unwrap()
}

#[test]
fn flags_override_config_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# local settings\nn = 4\nseries_eps = 1e-15\nformat=json\n").unwrap();
    let c = cfg.to_str().unwrap();

    let defaults = run(&["theta", "--grid", "1", "--format", "json"]);
    assert_eq!(config_n(&defaults), 3);
    let from_file = run(&["theta", "--grid", "1", "--config", c]);
    assert_eq!(config_n(&from_file), 4);
    assert_eq!(json(&from_file)["config"]["numerics"]["series_eps"].as_f64(), Some(1e-15));
    let flagged = run(&["theta", "--grid", "1", "--config", c, "--n", "2"]);
    assert_eq!(config_n(&flagged), 2);

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(run(&["theta", "--config", c]).status.code(), Some(2));
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["phi", "--n", "2", "--grid", "0.25"])
        .env("BERGMAN_FK_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(Path::new(dir.path()).join("phi.csv")).unwrap();
    assert!(written.starts_with("r,value,oracle,diff,tolerance,passed"));

    // an explicit --out wins
    let explicit = dir.path().join("mine.csv");
    bin()
        .args(["phi", "--grid", "0.25", "--out", explicit.to_str().unwrap()])
        .env("BERGMAN_FK_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(explicit.exists());
}

#[test]
fn wavelet_control_and_limits() {
    let out = run(&["wavelet", "witness", "--n", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["results"]["rows"].as_array().unwrap().len(), 0);
    for n in ["2", "4"] {
        assert_eq!(run(&["wavelet", "limits", "--n", n]).status.code(), Some(0));
        assert_eq!(run(&["wavelet", "ode", "--n", n]).status.code(), Some(0));
    }
}
