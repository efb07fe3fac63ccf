use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SIMULATE: &str = r#"{
  "experiment": "simulate",
  "grid": { "nx": 10, "ny": 8, "lx": 1.0, "ly": 0.8 },
  "material": { "rho_m": 1.0, "mu": 1.0, "lambda": 1.0, "nu1": 0.2 },
  "dissipation": { "kind": "none" },
  "stepper": { "dt": 0.01, "sample_every": 2 },
  "initial": { "kind": "random", "sqrt_energy": 0.1 },
  "t_end": 0.2,
  "snapshot_every": 5,
  "seed": 4
}"#;

fn melab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_melab"))
        .args(args)
        .env_remove("MELAB_OUTPUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    melab(&args)
}

#[test]
fn simulate_then_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", SIMULATE);
    let out = tmp.path().join("run");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["run.json", "energy.csv", "reports/simulate.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let record: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert!(record["checksums"]["energy.csv"].as_str().unwrap().len() == 64);

    let o = melab(&["replay", out.to_str().unwrap(), "--rerun"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["verified"], true);
    assert_eq!(rep["rerun_identical"], true);
    assert!(rep["snapshots_checked"].as_u64().unwrap() > 0);
}

#[test]
fn replay_locates_tampered_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sim.json", SIMULATE);
    let out = tmp.path().join("run");
    assert_eq!(run("simulate", &cfg, &out, &[]).status.code(), Some(0));
    let path = out.join("energy.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(str::to_string).collect();
    let v: f64 = cells[1].parse().unwrap();
    cells[1] = format!("{}", v * (1.0 + 1e-6));
    lines[3] = cells.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = melab(&["replay", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["verified"], false);
    assert_eq!(rep["checksums_ok"], false);
    let m = rep["mismatches"].as_array().unwrap();
    assert!(
        m.iter()
            .any(|m| m["file"] == "energy.csv" && m["row"] == 3 && m["column"] == "e_total"),
        "{m:?}"
    );
}

#[test]
fn invalid_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let unknown = write_config(
        tmp.path(),
        "a.json",
        &SIMULATE.replace("\"seed\"", "\"sede\""),
    );
    assert_eq!(run("simulate", &unknown, &out, &[]).status.code(), Some(2));
    let bad_dt = write_config(tmp.path(), "b.json", &SIMULATE.replace("0.01", "-0.01"));
    assert_eq!(run("simulate", &bad_dt, &out, &[]).status.code(), Some(2));
    let missing = tmp.path().join("nope.json");
    assert_eq!(run("simulate", &missing, &out, &[]).status.code(), Some(2));
}

#[test]
fn trivial_conditions_hold() {
    let tmp = tempfile::tempdir().unwrap();
    let text = include_str!("../../../configs/check-conditions.json").replace(
        "\"kind\": \"random\",\n    \"sqrt_energy\": 0.01",
        "\"kind\": \"zero\"",
    );
    assert!(text.contains("\"zero\""));
    let cfg = write_config(tmp.path(), "c.json", &text);
    let out = tmp.path().join("c");
    let o = run("check-conditions", &cfg, &out, &["--strict"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rep: Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("reports/conditions.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(rep["regularity"]["lhs"], 0.0);
    assert_eq!(rep["regularity"]["satisfied"], true);
}

#[test]
fn strict_refuses_inadmissible_period() {
    let tmp = tempfile::tempdir().unwrap();
    let text = include_str!("../../../configs/find-periodic.json");
    let cfg = write_config(tmp.path(), "p.json", text);
    let out = tmp.path().join("p");
    let o = run("find-periodic", &cfg, &out, &["--strict"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("R_cr"));
    assert!(!out.join("reports/orbit.json").exists());
}

#[test]
fn sweep_runs_every_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(SIMULATE).unwrap();
    cfg["t_end"] = 0.05.into();
    cfg["sweep"] =
        serde_json::json!([{ "material": { "nu1": 0.1 } }, { "material": { "nu1": 0.4 } }]);
    let path = write_config(tmp.path(), "s.json", &cfg.to_string());
    let out = tmp.path().join("s");
    let o = run("simulate", &path, &out, &["--jobs", "2"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for i in 0..2 {
        let sub = out.join(format!("sweep_{i:03}"));
        let r: Value =
            serde_json::from_str(&std::fs::read_to_string(sub.join("run.json")).unwrap()).unwrap();
        assert_eq!(r["config"]["material"]["nu1"], [0.1, 0.4][i]);
    }
    assert!(out.join("sweep.json").is_file());
}
