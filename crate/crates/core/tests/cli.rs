use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::Value;
use tempfile::tempdir;

use pmflow::cli::{run_command, RunConfig};
use pmflow::pmns::FieldFile;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["pmflow"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn out(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn landau_is_reproducible_byte_for_byte() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(run(&["landau", "--out", out(d.path()), "--c", "3", "--grid.n", "16"]), 0);
    }
    let csv_a = fs::read(a.path().join("landau_residual.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("landau_residual.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 4, "header plus three step sizes");
    let file = FieldFile::load(&a.path().join("landau.pmns")).unwrap();
    assert_eq!(file.grid.n(), 16);
    assert_eq!(file.times, vec![0.0]);
}

#[test]
fn stationary_writes_a_loadable_field() {
    let d = tempdir().unwrap();
    let code = run(&[
        "solve-stationary",
        "--out",
        out(d.path()),
        "--grid.n",
        "16",
        "--force.kind",
        "dirac",
        "--force.beta",
        "0.5",
        "0",
        "0",
    ]);
    assert_eq!(code, 0);
    let file = FieldFile::load(&d.path().join("stationary.pmns")).unwrap();
    assert_eq!(file.snapshots.len(), 1);
    assert!(file.snapshots[0].max_amplitude() > 0.0);
    let side: Value = serde_json::from_slice(&fs::read(d.path().join("stationary.json")).unwrap()).unwrap();
    assert!(side.get("certificate").is_some());
}

#[test]
fn divergent_picard_reports_its_certificate() {
    let d = tempdir().unwrap();
    let code = run(&[
        "solve-stationary",
        "--out",
        out(d.path()),
        "--grid.n",
        "16",
        "--force.kind",
        "dirac",
        "--force.beta",
        "60",
        "0",
        "0",
    ]);
    assert_eq!(code, 2);
    let cert: Value = serde_json::from_slice(&fs::read(d.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["certificate"]["smallness_ok"], Value::Bool(false));
}

#[test]
fn cauchy_snapshots_sit_at_decades() {
    let d = tempdir().unwrap();
    let code = run(&[
        "solve-cauchy",
        "--out",
        out(d.path()),
        "--grid.n",
        "16",
        "--timegrid.t_min",
        "0.1",
        "--timegrid.t_max",
        "10",
        "--force.kind",
        "dirac",
        "--force.beta",
        "0.3",
        "0",
        "0",
    ]);
    assert_eq!(code, 0);
    let file = FieldFile::load(&d.path().join("cauchy.pmns")).unwrap();
    assert_eq!(file.times.len(), 3);
    for (t, want) in file.times.iter().zip([0.1, 1.0, 10.0]) {
        assert!((t / want).ln().abs() <= 0.5 * 2f64.ln(), "{t} vs {want}");
    }
    let rows = fs::read_to_string(d.path().join("cauchy_norms.csv")).unwrap();
    assert_eq!(rows.lines().next(), Some("t,pm2,nonlinear_pm0"));
}

#[test]
fn config_file_and_overrides_merge() {
    let d = tempdir().unwrap();
    let cfg = d.path().join("run.json");
    fs::write(&cfg, r#"{"grid": {"n": 16, "box_length": 12.0}, "experiment": {"b": [1.5, 2.0]}}"#).unwrap();
    let o = d.path().join("o");
    assert_eq!(run(&["riesz", "--config", cfg.to_str().unwrap(), "--grid.n", "24", "--out", out(&o)]), 0);
    let written: Value = serde_json::from_slice(&fs::read(o.join("config.json")).unwrap()).unwrap();
    assert_eq!(written["grid"]["n"], 24);
    assert_eq!(written["grid"]["box_length"], 12.0);
    let csv = fs::read_to_string(o.join("riesz.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn usage_errors_exit_with_one() {
    let d = tempdir().unwrap();
    assert_eq!(run(&["no-such-command"]), 1);
    assert_eq!(run(&["landau", "--out", out(d.path()), "--grid.nn", "16"]), 1);
    assert_eq!(run(&["landau", "--out", out(d.path()), "--grid.n", "sixteen"]), 1);
    assert_eq!(run(&["rate-stability", "--out", out(d.path()), "--grid.n", "16"]), 1, "needs a second force");
    assert_eq!(run(&["--help"]), 0);
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn published_schema_matches_the_config_type() {
    let schema: Value = serde_json::from_str(include_str!("../schema/run_config.schema.json")).unwrap();
    let defaults = serde_json::to_value(RunConfig::default()).unwrap();
    let props = &schema["properties"];
    assert_eq!(keys(props), keys(&defaults));
    for section in ["grid", "timegrid", "experiment"] {
        assert_eq!(keys(&props[section]["properties"]), keys(&defaults[section]), "{section}");
        assert_eq!(props[section]["additionalProperties"], Value::Bool(false));
    }
}
