use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn psclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psclab")).args(args).output().expect("spawn psclab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const FLAT: &str = r#"{
  "ambient": { "preset": "flat_slab", "grid": { "dims": [16, 16, 9] } },
  "sweep": { "lengths": [1, 2], "truncations": [0.5] }
}"#;

fn diagnostics(cfg: &Path) -> (i32, Vec<Value>) {
    let o = psclab(&["validate", "--config", cfg.to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&o.stdout).expect("diagnostics are JSON");
    (code(&o), v.as_array().unwrap().clone())
}

#[test]
fn canonical_flat_config_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let (c, d) = diagnostics(&cfg);
    assert_eq!(c, 0);
    assert!(d.is_empty(), "{d:?}");
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(root).unwrap() {
        let p = entry.unwrap().path();
        let (c, d) = diagnostics(&p);
        assert!(c == 0 && d.is_empty(), "{}: {d:?}", p.display());
    }
}

#[test]
fn too_few_points_is_one_dims_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{ "ambient": { "preset": "flat_slab", "grid": { "dims": [3, 16, 9] } }, "sweep": { "lengths": [1] } }"#,
    );
    let (c, d) = diagnostics(&cfg);
    assert_eq!(c, 2);
    assert_eq!(d.len(), 1, "{d:?}");
    assert_eq!(d[0]["pointer"], "/ambient/grid/dims");
}

#[test]
fn off_grid_length_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{ "ambient": { "preset": "flat_slab", "grid": { "dims": [16, 16, 9] } }, "sweep": { "lengths": [1.03] } }"#,
    );
    let (c, d) = diagnostics(&cfg);
    assert_eq!(c, 2);
    assert!(d.iter().any(|x| x["pointer"] == "/sweep/lengths"), "{d:?}");
}

#[test]
fn unknown_keys_and_broken_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "extra.json",
        r#"{ "ambient": { "preset": "flat_slab", "grid": { "dims": [16, 16, 9], "spacing": 1 } } }"#,
    );
    let (c, d) = diagnostics(&cfg);
    assert_eq!(c, 2);
    assert_eq!(d[0]["pointer"], "/ambient/grid/spacing");
    let broken = write_config(dir.path(), "broken.json", "{ \"ambient\": ");
    assert_eq!(code(&psclab(&["validate", "--config", broken.to_str().unwrap()])), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&psclab(&["validate", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn collar_sweep_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let out = dir.path().join("out");
    let o = psclab(&["collar-sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").is_file());
    let header = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(header.starts_with("L,R,vol_WLR,vol_X_limit,sup_A,sup_grad_u,dist_C0,dist_C1,lambda1,converged\n"));

    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["command"], "collar-sweep");
    let cfg_hash = m["config"]["sha256"].as_str().unwrap();
    assert_eq!(cfg_hash.len(), 64);
    for entry in m["outputs"].as_array().unwrap() {
        assert!(out.join(entry["path"].as_str().unwrap()).is_file());
    }
    assert_eq!(m["volatile"][0], "timings.json");
}

#[test]
fn exhausted_budget_exits_three_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bumpy.json",
        r#"{
  "ambient": { "preset": "bumpy_slab", "grid": { "dims": [16, 16, 9] } },
  "solver": { "max_newton": 1, "max_flow": 1 },
  "sweep": { "lengths": [1] }
}"#,
    );
    let out = dir.path().join("out");
    let o = psclab(&["min-surface", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!o.stderr.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["solver"]["converged"], false);
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["exit_code"], 3);
}

#[test]
fn invalid_config_on_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{ "ambient": { "preset": "flat_slab", "grid": { "dims": [3, 16, 9] } } }"#,
    );
    let o = psclab(&["min-surface", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = psclab(&["fly"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

fn run_twice(cmd: &str, cfg: &Path, files: &[&str], dir: &Path) {
    let mut seen: Vec<Vec<Vec<u8>>> = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("{cmd}{k}"));
        let o = psclab(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        seen.push(files.iter().map(|f| fs::read(out.join(f)).unwrap()).collect());
    }
    for (i, f) in files.iter().enumerate() {
        assert!(seen[0][i] == seen[1][i], "{cmd}: {f} differs between reruns");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bumpy.json",
        r#"{
  "ambient": { "preset": "bumpy_slab", "grid": { "dims": [16, 16, 9] } },
  "sweep": { "lengths": [1, 2] }
}"#,
    );
    run_twice("collar-sweep", &cfg, &["sweep.csv", "report.json"], dir.path());
    let pipe = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/pipeline_flat.json");
    run_twice("pipeline", &pipe, &["certificate.json"], dir.path());
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let out = dir.path().join("out");
    let o = psclab(&[
        "min-surface",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed-override",
        "99",
    ]);
    assert_eq!(code(&o), 0);
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seeds"]["solver"], 99);
    assert_eq!(m["seeds"]["certificate"], 99);
}
