use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn srsw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srsw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_in(dir: &TempDir, cmd: &str, config: &Path, sub: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out_dir = dir.path().join(sub);
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    (srsw(&args), out_dir)
}

const SMALL: &str = r#"{
  "grid": {"n": 16},
  "basis": {"K": 4, "A": 0.05},
  "ic": {"kind": "random", "seed": 2, "kmax": 2, "norm12": 0.1},
  "T": 0.2,
  "R": 2.0,
  "monitors": {"R": [0.5], "M": [1.0]},
  "ensemble": {"paths": 1, "base_seed": 17}
}"#;

#[test]
fn rest_state_runs_to_zero_norms() {
    let dir = TempDir::new().unwrap();
    let (out, od) = run_in(&dir, "simulate", &shipped("rest.json"), "o", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(od.join("norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,norm12,norm22,t22,fR_value,mass"));
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(&cols[1..4], &[0.0, 0.0, 0.0]);
    }
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(od.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn unstable_dt_exits_with_named_constraint() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"grid": {"n": 64}, "T": 1.0, "dt": 0.25}"#,
    );
    let (out, _) = run_in(&dir, "simulate", &cfg, "o", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("viscous limit"), "{}", stderr(&out));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let (a, da) = run_in(&dir, "simulate", &cfg, "a", &[]);
    let (b, db) = run_in(&dir, "simulate", &cfg, "b", &[]);
    assert_eq!((code(&a), code(&b)), (0, 0));
    for f in ["norms.csv", "record.json"] {
        assert_eq!(
            fs::read(da.join(f)).unwrap(),
            fs::read(db.join(f)).unwrap(),
            "{f}"
        );
    }
    let (c, dc) = run_in(&dir, "simulate", &cfg, "c", &["--seed", "18"]);
    assert_eq!(code(&c), 0);
    assert_ne!(
        fs::read(da.join("norms.csv")).unwrap(),
        fs::read(dc.join("norms.csv")).unwrap()
    );
}

#[test]
fn blow_up_exits_two_and_keeps_partial_output() {
    let dir = TempDir::new().unwrap();
    let body = SMALL.replace(r#""M": [1.0]}"#, r#""M": [1.0], "ceiling": 0.05}"#);
    let cfg = write_config(&dir, "c.json", &body);
    let (out, od) = run_in(&dir, "simulate", &cfg, "o", &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(od.join("norms.csv").exists());
    assert!(od.join("record.json").exists());
}

#[test]
fn picard_huge_tolerance_stops_after_one_iterate() {
    let dir = TempDir::new().unwrap();
    let body = SMALL.replace(
        r#""ensemble""#,
        r#""dt": 0.05, "picard": {"tol": 1e6}, "ensemble""#,
    );
    let cfg = write_config(&dir, "c.json", &body);
    let (out, od) = run_in(&dir, "picard", &cfg, "o", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(od.join("iterates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn picard_desk_config_converges_geometrically() {
    let dir = TempDir::new().unwrap();
    let (out, od) = run_in(&dir, "picard", &shipped("picard.json"), "o", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(od.join("iterates.csv")).unwrap();
    let d: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(d.len() >= 3);
    for w in d.windows(2) {
        assert!(w[1] < 0.8 * w[0], "{d:?}");
    }
}

#[test]
fn picard_non_convergence_exits_three() {
    let dir = TempDir::new().unwrap();
    let body = SMALL.replace(
        r#""ensemble""#,
        r#""dt": 0.05, "picard": {"tol": 1e-30, "max_iter": 2}, "ensemble""#,
    );
    let cfg = write_config(&dir, "c.json", &body);
    let (out, od) = run_in(&dir, "picard", &cfg, "o", &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(od.join("iterates.csv").exists());
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"grid": {"n": 16}, "T": 0.1, "picard": {"tol": "small"}}"#,
    );
    let (out, _) = run_in(&dir, "picard", &cfg, "o", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("picard.tol"), "{}", stderr(&out));

    let cfg = write_config(
        &dir,
        "d.json",
        r#"{"grid": {"n": 16}, "T": 0.1, "params": {"epsilon": 0, "f": 1, "froude": 1, "nu": 0.1, "eta": 0.1}}"#,
    );
    let (out, _) = run_in(&dir, "simulate", &cfg, "o", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("params.epsilon"), "{}", stderr(&out));

    let missing = dir.path().join("nope.json");
    let (out, _) = run_in(&dir, "ensemble", &missing, "o", &[]);
    assert_eq!(code(&out), 1);
}

#[test]
fn single_path_ensemble_matches_simulate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", SMALL);
    let (s, ds) = run_in(&dir, "simulate", &cfg, "s", &[]);
    let (e, de) = run_in(&dir, "ensemble", &cfg, "e", &[]);
    assert_eq!((code(&s), code(&e)), (0, 0));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ds.join("record.json")).unwrap()).unwrap();
    let rows = fs::read_to_string(de.join("ensemble_rows.csv")).unwrap();
    let header: Vec<&str> = rows.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = rows.lines().nth(1).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("seed"), record["seed"].to_string());
    let summary = &record["summary"];
    for name in ["final_norm12", "sup_norm12", "final_t22"] {
        let a: f64 = col(name).parse().unwrap();
        assert_eq!(
            a.to_bits(),
            summary[name].as_f64().unwrap().to_bits(),
            "{name}"
        );
    }
}

#[test]
fn ensemble_reports_staying_probability_and_reproduces() {
    let dir = TempDir::new().unwrap();
    let body = SMALL
        .replace(r#""paths": 1"#, r#""paths": 64"#)
        .replace(r#""T": 0.2"#, r#""T": 0.5"#);
    let cfg = write_config(&dir, "c.json", &body);
    let (a, da) = run_in(&dir, "ensemble", &cfg, "a", &[]);
    let (b, db) = run_in(&dir, "ensemble", &cfg, "b", &[]);
    assert_eq!((code(&a), code(&b)), (0, 0));
    for f in ["ensemble_rows.csv", "ensemble.json"] {
        assert_eq!(
            fs::read(da.join(f)).unwrap(),
            fs::read(db.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        fs::read_to_string(da.join("ensemble_rows.csv"))
            .unwrap()
            .lines()
            .count(),
        65
    );
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(da.join("ensemble.json")).unwrap()).unwrap();
    let staying = &agg["aggregates"]["staying_probability"];
    assert!(staying.as_array().unwrap().len() == 2);
    for s in staying.as_array().unwrap() {
        let (lo, hi, p) = (
            s["ci_low"].as_f64().unwrap(),
            s["ci_high"].as_f64().unwrap(),
            s["probability"].as_f64().unwrap(),
        );
        assert!(lo <= p && p <= hi);
    }
}

#[test]
fn verify_rejects_unknown_suite() {
    let dir = TempDir::new().unwrap();
    let od = dir.path().join("o");
    let out = srsw(&["verify", "bogus", "--out", od.to_str().unwrap(), "--quiet"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown suite"));
}

#[test]
fn verify_advective_passes() {
    let dir = TempDir::new().unwrap();
    let od = dir.path().join("o");
    let out = srsw(&[
        "verify",
        "advective",
        "--out",
        od.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(od.join("advective_k0.json").exists());
    assert!(od.join("advective_k1.json").exists());
}

#[test]
fn verify_all_writes_one_json_per_estimate() {
    let dir = TempDir::new().unwrap();
    // reduced sizes keep this quick; the default suite runs at n = 64 and 128
    let cfg = write_config(
        &dir,
        "suite.json",
        r#"{
          "resolutions": [32],
          "samples": {"count": 40},
          "envelope": {"t_final": 0.5, "states": 10},
          "continuity": {"study": {"t_final": 0.2, "paths": 4, "M": 10}}
        }"#,
    );
    let od = dir.path().join("o");
    let out = srsw(&[
        "verify",
        "all",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        od.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(matches!(code(&out), 0 | 1), "{}", stderr(&out));
    let mut ids: Vec<String> = fs::read_dir(&od)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    for id in [
        "advective_k0.json",
        "advective_k1.json",
        "energy_drift.json",
        "energy_diffusion.json",
        "continuity.json",
        "growth_a.json",
        "envelope_0.json",
    ] {
        assert!(ids.iter().any(|f| f == id), "{id} missing from {ids:?}");
    }
    for f in &ids {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(od.join(f)).unwrap()).unwrap();
        assert_eq!(format!("{}.json", v["id"].as_str().unwrap()), *f);
    }
}
