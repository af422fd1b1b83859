use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn serfati(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serfati")).args(args).env_remove("SERFATI_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn usage_and_help() {
    assert_eq!(code(&serfati(&["--help"])), 0);
    assert_eq!(code(&serfati(&["--version"])), 0);
    let o = serfati(&["bogus"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&serfati(&["certify-kernels", "--domain", "sphere"])), 2);
    assert_eq!(code(&serfati(&["check-identity"])), 2);
    assert_eq!(code(&serfati(&["check-identity", "--scenario", "nope"])), 2);
    assert_eq!(code(&serfati(&["--threads", "0", "list-scenarios"])), 2);
}

#[test]
fn list_scenarios_catalogue() {
    let o = serfati(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for name in ["blob", "strip", "radial-exterior", "galilean-nonexample", "disk-blob"] {
        assert!(s.lines().any(|l| l.starts_with(&format!("{name},"))), "{name}");
    }
    assert!(s.contains("refused"));
}

#[test]
fn galilean_identity_residual_is_t() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("id");
    let o = serfati(&["check-identity", "--scenario", "galilean-nonexample", "--t", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let r = &v["residual"];
    let (r1, r2) = (r["x1"].as_f64().unwrap(), r["x2"].as_f64().unwrap());
    assert!((r1 - 1.0).abs() <= 0.05 && r2.abs() <= 0.05, "{v}");
    assert_eq!(v["expected_solution"], Value::Bool(false));
    assert!(out.join("residual.json").exists() && out.join("manifest.json").exists());

    let o = serfati(&["check-identity", "--scenario", "radial-exterior", "--x", "1.5,-0.5", "--eps", "1"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["within_budget"], Value::Bool(true), "{v}");
    // point inside the obstacle
    assert_eq!(code(&serfati(&["check-identity", "--scenario", "radial-exterior", "--x", "0.2,0"])), 2);
}

#[test]
fn simulate_zero_time_writes_one_snapshot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = serfati(&["simulate", "--set", "t_final=0", "--set", "h=0.25", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps: Vec<_> = std::fs::read_dir(out.join("snapshots")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(snaps.iter().filter(|n| n.to_string_lossy().ends_with(".csv")).count(), 1);
    assert_eq!(read(&out.join("conservation.ndjson")).iter().filter(|b| **b == b'\n').count(), 1);
    let m: Value = serde_json::from_slice(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(m["verb"], "simulate");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["inputs"]["config"]["h"], 0.25);
    assert_eq!(m["inputs"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["fitted_constants"]["solver"]["envelope"].is_number());
    assert!(m["outputs"].as_array().unwrap().iter().any(|f| f == "snapshots/step_000000.csv"));

    // the recorded config reruns the job to the same hash
    let again = dir.path().join("again");
    let o = serfati(&["simulate", "--config", out.join("config.json").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m2: Value = serde_json::from_slice(&read(&again.join("manifest.json"))).unwrap();
    assert_eq!(m["inputs"]["config_sha256"], m2["inputs"]["config_sha256"]);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"scenario": "perturbed-blob", "h": 0.25, "dt": 0.0625, "t_final": 0.25, "snapshot_every": 2}"#).unwrap();
    let mut dirs = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{k}"));
        let o = serfati(&["--threads", threads, "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        dirs.push(out);
    }
    for f in ["conservation.ndjson", "snapshots/step_000000.csv", "snapshots/step_000002.csv", "snapshots/step_000004.csv", "config.json"] {
        assert_eq!(read(&dirs[0].join(f)), read(&dirs[1].join(f)), "{f}");
    }
    let csv = String::from_utf8(read(&dirs[0].join("snapshots/step_000004.csv"))).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x1,x2,u1,u2,omega,label1,label2");
    assert_eq!(csv.lines().count(), 1 + 17 * 17);
}

#[test]
fn simulate_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = serfati(&[
        "simulate", "--set", "h=0.25", "--set", "dt=0.0625", "--set", "t_final=0.25",
        "--set", "fitted_constants.envelope=0.01", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(out.join("conservation.ndjson").exists() && out.join("manifest.json").exists());
    assert_eq!(code(&serfati(&["simulate", "--set", "dt=-1", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&serfati(&["simulate", "--set", "no_such_key=1", "--out", out.to_str().unwrap()])), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&serfati(&["simulate", "--config", missing.to_str().unwrap()])), 4);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = serfati(&["simulate", "--set", "t_final=0", "--set", "h=0.25", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn compare_runs_and_rejects_mismatched_grids() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let a = write("a.json", r#"{"scenario": "blob", "h": 0.25, "dt": 0.0625, "t_final": 0.25}"#);
    let b = write("b.json", r#"{"scenario": "perturbed-blob", "h": 0.25, "dt": 0.0625, "t_final": 0.25, "params": {"perturbation": 0.001}}"#);
    let c = write("c.json", r#"{"scenario": "blob", "h": 0.125, "dt": 0.0625, "t_final": 0.25}"#);
    let out = dir.path().join("cmp");
    let o = serfati(&["compare", "--config", a.to_str().unwrap(), "--against", b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_slice(&read(&out.join("comparison.json"))).unwrap();
    assert_eq!(s["h_within_m"], Value::Bool(true));
    assert_eq!(s["within_bound"], Value::Bool(true));
    let table = String::from_utf8(read(&out.join("comparison.csv"))).unwrap();
    assert_eq!(table.lines().count(), 1 + 5);
    assert!(out.join("a/conservation.ndjson").exists() && out.join("b/snapshots/step_000004.csv").exists());

    let o = serfati(&["compare", "--config", a.to_str().unwrap(), "--against", c.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grids differ"));
}

#[test]
fn certify_kernels_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert");
    let o = serfati(&["certify-kernels", "--domain", "plane", "--eps", "0.5,1,2,4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("near_l1.plane") && s.contains("far_l1.plane"), "{s}");
    let reports: Value = serde_json::from_slice(&read(&out.join("reports.json"))).unwrap();
    let near = &reports[0];
    for row in near["rows"].as_array().unwrap() {
        let r = row["ratio"].as_f64().unwrap();
        assert!((r - 0.75).abs() <= 1e-3, "{r}");
    }
    assert_eq!(code(&serfati(&["certify-kernels", "--domain", "disk", "--x", "0.5,0"])), 2);
    assert_eq!(code(&serfati(&["certify-kernels", "--domain", "disk", "--x", "2.0"])), 2);
}

#[test]
fn approx_init_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ap");
    let o = serfati(&["approx-init", "--n", "4,8", "--nodes", "13", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(read(&out.join("sequence.csv"))).unwrap();
    let rows: Vec<Vec<f64>> = table.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1][1] < rows[0][1]);
    assert_eq!(code(&serfati(&["approx-init", "--n", "2"])), 2);
}
