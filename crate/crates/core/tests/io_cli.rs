use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use combscatter::io::config::{parse_config, Strength};
use combscatter::io::container::{encode_native, load_scattering, read_generic_csv, write_generic_csv, DataFormat};
use combscatter::model::{DeviceParams, ModeGrid, PumpScheme};
use combscatter::scattering::simulate;
use combscatter::Error;
use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combscatter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_config_parses() {
    let c = parse_config(&fs::read_to_string(config_path("threepump.cfg")).unwrap()).unwrap();
    let grid = c.mode_grid().unwrap();
    assert_eq!(grid.half_span(), 47);
    assert!((grid.spacing() - TAU * 0.1e6).abs() < 1e-6);
    let offsets: BTreeSet<i64> = c.tones.iter().map(|t| t.offset).collect();
    assert_eq!(offsets, [-4, 0, 4].into_iter().collect());
    assert!(c.tones.iter().all(|t| t.strength == Strength::CouplingRatio(0.077)));
    for name in ["onepump.cfg", "twopump.cfg"] {
        parse_config(&fs::read_to_string(config_path(name)).unwrap()).unwrap();
    }
}

#[test]
fn simulate_at_pi_gives_square_ladders() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config_path("threepump.cfg");
    let summary = ok(&["simulate", cfg.to_str().unwrap(), "--phase1", "180deg", "--out-dir", out]);
    assert_eq!(summary["outputs"].as_array().unwrap().len(), 4);
    let topo = json(&dir.path().join("topology.json"));
    let comps = topo["components"].as_array().unwrap();
    assert_eq!(comps.len(), 3);
    assert!(comps.iter().all(|c| c["label"] == "square_ladder"));
    assert_eq!(topo["config_sha256"], summary["config_sha256"]);
    let csv = fs::read_to_string(dir.path().join("s_db.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# combscatter "));
    assert!(lines[0].contains("config_sha256="));
    assert_eq!(lines.len(), 2 + 190);
    assert_eq!(lines[1].split(',').count(), 191);
    let dot = fs::read_to_string(dir.path().join("graph.dot")).unwrap();
    assert_eq!(dot.matches("subgraph cluster_").count(), 3);
}

#[test]
fn outputs_are_byte_deterministic() {
    let cfg = config_path("threepump.cfg");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        ok(&["simulate", cfg.to_str().unwrap(), "--out-dir", out]);
        ok(&["sample-covariance", cfg.to_str().unwrap(), "--samples", "5000", "--seed", "9", "--out-dir", out]);
        let mut files = Vec::new();
        for name in ["s_db.csv", "scattering.dat", "topology.json", "graph.dot", "sample_covariance.csv"] {
            files.push(fs::read(dir.path().join(name)).unwrap());
        }
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_changes_samples() {
    let cfg = config_path("threepump.cfg");
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        ok(&["sample-covariance", cfg.to_str().unwrap(), "--samples", "3000", "--seed", seed, "--out-dir", out]);
        fs::read(dir.path().join("sample_covariance.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn sweep_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config_path("threepump.cfg");
    ok(&["sweep-phase", cfg.to_str().unwrap(), "--tone", "1", "--steps", "72", "--out-dir", out]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let header: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header[0], "phase_rad");
    // s = 28: three idlers and four third-order products
    assert_eq!(header.len(), 1 + 3 + 4);
    assert_eq!(lines.len() - 2, 72);
    assert!(lines[2..].iter().all(|l| l.split(',').count() == header.len()));
}

#[test]
fn fit_recovers_generating_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config_path("threepump.cfg");
    ok(&["simulate", cfg.to_str().unwrap(), "--out-dir", out]);
    let data = dir.path().join("sim_selfcheck.dat");
    fs::rename(dir.path().join("scattering.dat"), &data).unwrap();
    ok(&["fit", "--data", data.to_str().unwrap(), cfg.to_str().unwrap(), "--out-dir", out]);
    let fit = json(&dir.path().join("fit.json"));
    let ridge = fit["ridge_ratio"].as_f64().unwrap();
    assert!((ridge - 0.077).abs() / 0.077 < 0.01, "ridge {ridge}");
    assert!(fit["valley_variance_ratio"].as_f64().unwrap() < 1e-2);
}

#[test]
fn graph_from_data_matches_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config_path("threepump.cfg");
    ok(&["simulate", cfg.to_str().unwrap(), "--out-dir", out]);
    let simulated = json(&dir.path().join("topology.json"));
    let data = dir.path().join("scattering.dat");
    ok(&["graph", cfg.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out-dir", out]);
    let loaded = json(&dir.path().join("topology.json"));
    for key in ["config_sha256", "node_count", "edge_count", "components", "self_loops"] {
        assert_eq!(loaded[key], simulated[key], "{key}");
    }
    let (a, b) = (loaded["edges"].as_array().unwrap(), simulated["edges"].as_array().unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!((&x[0], &x[1]), (&y[0], &y[1]));
        assert!((x[2].as_f64().unwrap() - y[2].as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn search_and_idlers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config_path("threepump.cfg");
    let target = dir.path().join("target");
    fs::create_dir(&target).unwrap();
    ok(&["simulate", cfg.to_str().unwrap(), "--phase1", "180deg", "--out-dir", target.to_str().unwrap()]);
    let t = target.join("topology.json");
    ok(&["search-phases", cfg.to_str().unwrap(), "--target", t.to_str().unwrap(), "--out-dir", out]);
    let s = json(&dir.path().join("search.json"));
    assert_eq!(s["objective"], 0);
    ok(&["predict-idlers", cfg.to_str().unwrap(), "--signal", "45", "--out-dir", out]);
    let p = json(&dir.path().join("idlers.json"));
    assert_eq!(p["dropped"], serde_json::json!([-49, 49, 53]));
    ok(&["covariance", cfg.to_str().unwrap(), "--out-dir", out]);
    let c = json(&dir.path().join("covariance.json"));
    assert!(c["symplectic_defect"].as_f64().unwrap() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let missing = run(&["simulate", "/nonexistent/x.cfg", "--out-dir", out]);
    assert_eq!(missing.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"], "io");

    let text = fs::read_to_string(config_path("threepump.cfg")).unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, text.replacen("offset = -4", "offset = 3.5", 1).replace("\"112 MHz\"", "112")).unwrap();
    let invalid = run(&["simulate", bad.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(invalid.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&invalid.stderr).unwrap();
    let issues = err["issues"].as_array().unwrap();
    assert_eq!(issues.len(), 2);
    assert!(issues.iter().any(|i| i["message"].as_str().unwrap().contains("offset must be integer")));

    let hot = dir.path().join("hot.cfg");
    fs::write(&hot, text.replace("coupling_ratio = 0.077", "coupling_ratio = 0.3")).unwrap();
    let above = run(&["simulate", hot.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(above.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&above.stderr).unwrap();
    assert_eq!(err["error"], "above-threshold");
}

fn sample_matrix() -> combscatter::scattering::ScatteringMatrix {
    let grid = ModeGrid::new(TAU * 4.2e9, TAU * 0.1e6, 5).unwrap();
    let params = DeviceParams::new(TAU * 4.2e9, TAU * 112e6).unwrap();
    let s = PumpScheme::balanced(&[-4, 0, 4], &[0.1, 0.2, 0.3], params.strength_for_ratio(0.1)).unwrap();
    simulate(&grid, &params, &s).unwrap()
}

#[test]
fn container_round_trips_are_bit_identical() {
    let s = sample_matrix();
    let dir = tempfile::tempdir().unwrap();
    let native = dir.path().join("s.dat");
    fs::write(&native, encode_native(&s)).unwrap();
    let back = load_scattering(&native, &DataFormat::Native).unwrap();
    assert_eq!(back.matrix(), s.matrix());
    let (csv, side) = write_generic_csv(&s);
    let (c, j) = (dir.path().join("s.csv"), dir.path().join("s.json"));
    fs::write(&c, &csv).unwrap();
    fs::write(&j, &side).unwrap();
    let back = load_scattering(&c, &DataFormat::GenericCsv { sidecar: j }).unwrap();
    assert_eq!(back.matrix(), s.matrix());
    assert_eq!(back.grid(), s.grid());
}

#[test]
fn csv_with_missing_column_is_rejected() {
    let s = sample_matrix();
    let (csv, side) = write_generic_csv(&s);
    let short: String = csv
        .lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.pop();
            cells.join(",") + "\n"
        })
        .collect();
    match read_generic_csv(&short, &side) {
        Err(Error::Format(m)) => assert!(m.contains("cells, expected 22"), "{m}"),
        other => panic!("{other:?}"),
    }
}
