//! End-to-end tests of the `specshare` binary: CSV schema, validation exit
//! codes, sweep determinism, codebook round-trips, and the boundary export.
//!
//! Every config here is deliberately tiny (hundreds of samples, one or two
//! restarts) — these tests exercise plumbing, not measurement accuracy.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specshare"))
}

fn write_config(dir: &Path, value: &Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Parse one CSV body cell by header name (single-data-row outputs).
fn cell<'a>(csv: &'a str, header: &str) -> &'a str {
    let mut lines = csv.lines();
    let names: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = names
        .iter()
        .position(|n| *n == header)
        .unwrap_or_else(|| panic!("no column {header} in {names:?}"));
    row[idx]
}

/// Strip the trailing wall-clock column, the only nondeterministic one.
fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let (rest, _) = l.rsplit_once(',').unwrap();
            rest
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn tiny_config() -> Value {
    json!({
        "M": 1, "B": 2, "P_avg_dB": 5.0, "Q_avg_dB": [-5.0],
        "N_train": 400, "restarts": 2, "seed": 3
    })
}

#[test]
fn gla_emits_schema_row_and_codebook() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "gla",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    assert!(csv.starts_with(
        "P_avg_dB,method,B,q_f,capacity_nats,capacity_se,ATP,AIP_1,lambda,mu_1,iterations,status,wall_ms\n"
    ));
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(cell(&csv, "method"), "gla");
    assert_eq!(cell(&csv, "B"), "2");
    assert_eq!(cell(&csv, "status"), "ok");
    assert!(cell(&csv, "capacity_nats").parse::<f64>().unwrap() > 0.0);
    assert!(cell(&csv, "iterations").parse::<usize>().unwrap() > 0);
    // The interference cap (-5 dB -> 0.316228 linear) binds in this regime.
    let aip: f64 = cell(&csv, "AIP_1").parse().unwrap();
    assert!((aip - 0.316228).abs() < 0.02, "AIP {aip}");
    // --out mirrors the CSV and stores the codebook.
    assert_eq!(std::fs::read_to_string(out_dir.join("results.csv")).unwrap(), csv);
    assert!(out_dir.join("codebook_gla_B2_P5.json").exists());
}

#[test]
fn quantization_never_beats_full_csi() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let gla = run(&["gla", "--config", cfg.to_str().unwrap()]);
    let full = run(&["fullcsi", "--config", cfg.to_str().unwrap()]);
    assert!(gla.status.success() && full.status.success());
    let c_gla: f64 = cell(&stdout(&gla), "capacity_nats").parse().unwrap();
    let c_full: f64 = cell(&stdout(&full), "capacity_nats").parse().unwrap();
    assert!(c_gla <= c_full + 1e-12, "gla {c_gla} vs fullcsi {c_full}");
    assert_eq!(cell(&stdout(&full), "B"), "0");
    assert_eq!(cell(&stdout(&full), "iterations"), "0");
}

#[test]
fn validation_failures_name_the_field_and_exit_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (json!({"M": 4, "B": 2, "P_avg_dB": 10.0}), "Q_avg_dB"),
        (json!({"M": 4, "B": 2, "P_avg_dB": 10.0, "Q_avg_dB": [-5.0, 0.0]}), "Q_avg_dB"),
        (json!({"L": 6, "q_f": 0.1, "P_avg_dB": 5.0, "Q_avg_dB": [0.0]}), "L"),
        (json!({"B": 2, "P_avg_dB": 5.0, "Q_avg_dB": [0.0], "frobnicate": 1}), "frobnicate"),
        (json!({"B": 2, "P_avg_dB": 5.0, "Q_avg_dB": [0.0], "q_f": 0.7}), "q_f"),
    ];
    for (value, field) in cases {
        let cfg = write_config(dir.path(), &value);
        let out = run(&["gla", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{value}");
        assert!(stderr(&out).contains(field), "{value}: {}", stderr(&out));
    }
    // A missing P_avg_dB only matters for single-point commands.
    let cfg = write_config(dir.path(), &json!({"B": 2, "Q_avg_dB": [0.0]}));
    let out = run(&["gla", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("P_avg_dB"));
}

#[test]
fn sweep_has_stable_order_and_reruns_byte_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &json!({
            "M": 1, "B": [1, 2], "Q_avg_dB": [-5.0], "N_train": 400,
            "restarts": 1, "seed": 3, "method": ["fullcsi", "gla"],
            "sweep": {"start": 0.0, "stop": 10.0, "step": 5.0}
        }),
    );
    let first = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    let second = run(&["sweep", "--config", cfg.to_str().unwrap(), "--workers", "2"]);
    assert!(first.status.success() && second.status.success());
    let a = stdout(&first);
    // 3 budgets x (1 fullcsi row + 2 gla sizes) + header.
    assert_eq!(a.lines().count(), 10);
    let col =
        |line: &str, i: usize| line.split(',').nth(i).unwrap().to_string();
    let rows: Vec<&str> = a.lines().skip(1).collect();
    let mut expected = Vec::new();
    for p in ["0.000000", "5.00000", "10.0000"] {
        expected.extend([
            (p, "fullcsi", "0"),
            (p, "gla", "1"),
            (p, "gla", "2"),
        ]);
    }
    for (row, (p, method, bits)) in rows.iter().zip(expected) {
        assert_eq!(col(row, 0), p);
        assert_eq!(col(row, 1), method);
        assert_eq!(col(row, 2), bits);
    }
    assert_eq!(strip_wall_ms(&a), strip_wall_ms(&stdout(&second)));
}

#[test]
fn seed_flag_overrides_and_stays_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let a = run(&["gla", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    let b = run(&["gla", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    let c = run(&["gla", "--config", cfg.to_str().unwrap(), "--seed", "10"]);
    assert_eq!(strip_wall_ms(&stdout(&a)), strip_wall_ms(&stdout(&b)));
    assert_ne!(
        cell(&stdout(&a), "capacity_nats"),
        cell(&stdout(&c), "capacity_nats"),
        "different seeds should draw different training sets"
    );
}

#[test]
fn bits_toggle_rescales_by_ln2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let nats = run(&["gla", "--config", cfg.to_str().unwrap()]);
    let bits = run(&["gla", "--config", cfg.to_str().unwrap(), "--bits-capacity"]);
    let c_nats: f64 = cell(&stdout(&nats), "capacity_nats").parse().unwrap();
    let c_bits: f64 = cell(&stdout(&bits), "capacity_bits").parse().unwrap();
    assert!((c_bits - c_nats / std::f64::consts::LN_2).abs() < 1e-4, "{c_bits} vs {c_nats}");
}

#[test]
fn codebook_verifies_and_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "gla",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cb_path = out_dir.join("codebook_gla_B2_P5.json");

    let ok = run(&["verify", cb_path.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("capacity reproduced"));

    // Nudging a level must break the recorded-capacity reproduction.
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(&cb_path).unwrap()).unwrap();
    let level = doc["codebooks"][0][0].as_f64().unwrap();
    doc["codebooks"][0][0] = json!(level * 1.01);
    std::fs::write(&cb_path, serde_json::to_string(&doc).unwrap()).unwrap();
    let bad = run(&["verify", cb_path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("mismatch") || stderr(&bad).contains("violated"));
}

#[test]
fn gla2_round_trips_through_its_codebook_file() {
    let dir = TempDir::new().unwrap();
    let mut cfg_value = tiny_config();
    cfg_value["q_f"] = json!(0.05);
    cfg_value["restarts"] = json!(1);
    let cfg = write_config(dir.path(), &cfg_value);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "gla2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(cell(&stdout(&out), "q_f"), "0.0500000");
    let verify = run(&["verify", out_dir.join("codebook_gla2_B2_P5.json").to_str().unwrap()]);
    assert!(verify.status.success(), "{}", stderr(&verify));
    assert!(stdout(&verify).contains("capacity reproduced"));
}

#[test]
fn boundaries_exports_polylines() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "gla",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cb = out_dir.join("codebook_gla_B2_P5.json");
    let bounds = run(&["boundaries", cb.to_str().unwrap()]);
    assert!(bounds.status.success(), "{}", stderr(&bounds));
    let csv = stdout(&bounds);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "band,pair,g0,g1");
    let mut rows = 0;
    let mut last: Option<(usize, f64, f64)> = None;
    for line in lines {
        let parts: Vec<&str> = line.split(',').collect();
        assert_eq!(parts.len(), 4);
        let pair: usize = parts[1].parse().unwrap();
        let g0: f64 = parts[2].parse().unwrap();
        let g1: f64 = parts[3].parse().unwrap();
        assert!(g1.is_finite() && g1 >= 0.0);
        // Within a polyline the boundary never decreases in g0 (the water
        // penalty only grows with the interference gain).
        if let Some((lp, lg0, lg1)) = last {
            if lp == pair {
                assert!(g0 > lg0);
                assert!(g1 >= lg1 - 1e-12, "pair {pair}: {g1} < {lg1}");
            }
        }
        last = Some((pair, g0, g1));
        rows += 1;
    }
    assert!(rows >= 100, "expected dense polylines, got {rows} rows");
}
