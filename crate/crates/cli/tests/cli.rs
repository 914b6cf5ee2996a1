use std::path::Path;
use std::process::{Command, Output};

use cavity_battery::sweep::SweepResult;

fn qbcharge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbcharge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = qbcharge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Parses the data rows of a CSV file, skipping `#` lines, keyed by header.
fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn rabi_population_is_sine_squared() {
    let text = stdout(&["evolve", "--gamma", "0", "--lambda", "1", "--tmax", "6.2832", "--steps", "401"]);
    let t = csv_column(&text, "Omega_tau");
    let p = csv_column(&text, "population");
    assert_eq!(t.len(), 401);
    for (t, p) in t.iter().zip(&p) {
        assert!((p - t.sin().powi(2)).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn memoryless_peak() {
    let text = stdout(&["evolve", "--gamma", "0.1", "--lambda", "inf", "--tmax", "25", "--steps", "2501"]);
    let peak = csv_column(&text, "stored_energy").into_iter().fold(0.0, f64::max);
    assert!((peak - 0.925).abs() < 0.005, "{peak}");
}

#[test]
fn with_memory_curve_rises_above_memoryless_peak() {
    let text = stdout(&["evolve", "--gamma", "0.1", "--lambda", "0.1", "--tmax", "25"]);
    let e = csv_column(&text, "stored_energy");
    let w = csv_column(&text, "ergotropy");
    assert_eq!(e.len(), 1001);
    assert!(e.iter().cloned().fold(0.0, f64::max) > 0.93);
    assert!(e.iter().zip(&w).all(|(e, w)| *w <= *e + 1e-15 && *w >= 0.0));
}

#[test]
fn output_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = qbcharge(&["evolve", "--gamma", "0.3", "--lambda", "0.7", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let args = ["sweep", "--gamma-axis", "0.1:2:4:log", "--lambda-axis", "0.1,1,inf", "--quantity", "ergotropy_max"];
    let one = stdout(&[&["--jobs", "1"][..], &args].concat());
    let four = stdout(&[&["--jobs", "4"][..], &args].concat());
    assert_eq!(one, four);
}

#[test]
fn single_cell_sweep_equals_maxima() {
    let sweep = stdout(&[
        "sweep", "--gamma-axis", "0.7", "--lambda-axis", "0.3", "--quantity", "stored_energy_max", "--format", "json",
    ]);
    let grid = SweepResult::from_json(&sweep).unwrap();
    let maxima = stdout(&["maxima", "--gamma", "0.7", "--lambda", "0.3", "--format", "json"]);
    let m: serde_json::Value = serde_json::from_str(&maxima).unwrap();
    assert_eq!(grid.shape(), (1, 1));
    assert_eq!(grid.get(0, 0), m["maxima"]["delta_e_max"].as_f64().unwrap());

    let csv = stdout(&["maxima", "--gamma", "0.7", "--lambda", "0.3"]);
    assert_eq!(csv_column(&csv, "delta_e_max")[0], grid.get(0, 0));
}

#[test]
fn json_sweep_round_trips() {
    let text = stdout(&["sweep", "--gamma-axis", "0.5:3:3", "--lambda-axis", "0.2,inf", "--format", "json"]);
    let grid = SweepResult::from_json(&text).unwrap();
    assert_eq!(grid.to_json().unwrap(), text);
    assert_eq!(grid.shape(), (3, 2));
}

#[test]
fn memoryless_threshold_in_sweep() {
    let text = stdout(&[
        "sweep", "--gamma-axis", "3.9,4.1", "--lambda-axis", "inf", "--quantity", "nonmarkovianity", "--format", "json",
    ]);
    let grid = SweepResult::from_json(&text).unwrap();
    assert!(grid.get(0, 0) > 0.0);
    assert_eq!(grid.get(1, 0), 0.0);
}

#[test]
fn closed_system_sweep_flags_divergence() {
    let text = stdout(&["sweep", "--gamma-axis", "0,1", "--lambda-axis", "1", "--quantity", "nonmarkovianity", "--tmax", "50"]);
    assert!(text.contains("# flag: gamma/Omega=0.0000000000000000e0 lambda/Omega=1.0000000000000000e0 divergent"));
}

#[test]
fn nonmarkov_truncation_exits_4_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.csv");
    let out = qbcharge(&["nonmarkov", "--gamma", "0", "--lambda", "1", "--tmax", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv_column(&text, "divergent"), vec![1.0]);

    let ok = qbcharge(&["nonmarkov", "--gamma", "1", "--lambda", "inf"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(csv_column(&text, "measure")[0] > 0.0);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["evolve", "--lambda", "nope"][..],
        &["evolve", "--gamma=-1"],
        &["evolve", "--steps", "1"],
        &["evolve", "--format", "xml"],
        &["sweep", "--quantity", "energy"],
        &["sweep", "--gamma-axis", "inf"],
        &["sweep", "--gamma-axis", "1:2"],
        &["frobnicate"],
    ] {
        assert_eq!(code(&qbcharge(args)), 2, "{args:?}");
    }
}

#[test]
fn unknown_figure_lists_valid_names() {
    let out = qbcharge(&["figure", "fig9"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    for name in cavity_battery::figures::FIGURE_NAMES {
        assert!(err.contains(name));
    }
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    let out = qbcharge(&["evolve", "--out", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 3);

    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = qbcharge(&["figure", "fig3a", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&out), 3);

    assert_eq!(code(&qbcharge(&["--config", "/no/such/config", "evolve"])), 3);
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# charging run\ngamma = 0\nlambda = 1\ntmax = 3.0\nsteps = 7\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_cfg = stdout(&["--config", cfg, "evolve"]);
    let p = csv_column(&from_cfg, "population");
    let t = csv_column(&from_cfg, "Omega_tau");
    assert_eq!(p.len(), 7);
    assert!((t[6] - 3.0).abs() < 1e-15);
    assert!((p[6] - 3f64.sin().powi(2)).abs() < 1e-12);

    let flagged = stdout(&["--config", cfg, "evolve", "--steps", "3"]);
    assert_eq!(csv_column(&flagged, "population").len(), 3);

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(code(&qbcharge(&["--config", bad.to_str().unwrap(), "evolve"])), 2);
}

#[test]
fn fig7a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbcharge(&["figure", "fig7a", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("fig7a_manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let values: Vec<f64> = m["annotations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["value"].as_f64().unwrap())
        .collect();
    assert!(values.contains(&0.925) && values.contains(&0.851));
    for d in m["datasets"].as_array().unwrap() {
        assert!(Path::new(&dir.path().join(d["file"].as_str().unwrap())).exists());
    }
}

#[test]
fn fig3b_has_ergotropy_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbcharge(&["figure", "fig3b", "--out", dir.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig3b_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["datasets"].as_array().unwrap().len(), 4);
    assert_eq!(m["y"]["column"], "ergotropy");
}
