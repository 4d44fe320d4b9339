//! End-to-end runs of the `funnel` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use funnel_control::report::{csv_header, read_csv};

fn funnel(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funnel"))
        .args(args)
        .env("FUNNEL_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const CHAIN: &str = r#"
id = "chain"

[system]
kind = "integrator-chain"
m = 1
r = 2
y0 = [0.2, 0.0]

[controller]
kind = "funnel"
n = "negated-identity"
phi = { family = "recip-exp", c0 = 2.0, c1 = 0.1, lambda = 1.0 }

[reference]
preset = "sin"

[sim]
t_end = 2.0

[[verify]]
kind = "funnel-margin"
"#;

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "chain.toml", CHAIN);
    let out = funnel(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("1 checks, 0 failed"));
    for f in ["chain.csv", "chain.svg", "chain.verdicts.txt"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let table = read_csv(fs::File::open(dir.path().join("chain.csv")).unwrap()).unwrap();
    assert_eq!(table.header, csv_header(1));
    assert_eq!(table.header.len(), 7);
    let last = table.rows.last().unwrap();
    assert!((last[0] - 2.0).abs() < 1e-12);
    // phi_norm_e stays below one on every written sample
    assert!(table.rows.iter().all(|r| r[5] < 1.0));
}

#[test]
fn csv_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "chain.toml", CHAIN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = funnel(&["run", &path, "--no-svg", "--out-dir", d.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(a.join("chain.csv")).unwrap(), fs::read(b.join("chain.csv")).unwrap());
    assert!(!a.join("chain.svg").exists());
}

#[test]
fn derivative_companion_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "chain.toml", CHAIN);
    let out = funnel(&["run", &path, "--derivatives"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let main = read_csv(fs::File::open(dir.path().join("chain.csv")).unwrap()).unwrap();
    let derivs = read_csv(fs::File::open(dir.path().join("chain.derivs.csv")).unwrap()).unwrap();
    assert_eq!(derivs.header, ["t", "y0_1", "y1_1", "e0_1", "e1_1"]);
    assert_eq!(derivs.rows.len(), main.rows.len());
    // shared columns agree bit for bit
    for (d, m) in derivs.rows.iter().zip(&main.rows) {
        assert_eq!((d[0], d[1], d[3]), (m[0], m[1], m[2]));
    }
}

#[test]
fn unbounded_funnel_below_relative_degree_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = CHAIN
        .replace(r#"phi = { family = "recip-exp", c0 = 2.0, c1 = 0.1, lambda = 1.0 }"#, r#"phi = { family = "poly", a = 1.0, exponent = 2 }"#)
        .replace(r#"n = "negated-identity""#, "n = \"negated-identity\"\nr_hat = 1");
    let path = write_scenario(dir.path(), "bad.toml", &body);
    let out = funnel(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out) + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("bounded"), "{text}");
}

#[test]
fn rejected_initial_condition_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "far.toml", &CHAIN.replace("y0 = [0.2, 0.0]", "y0 = [6.0, 1.0]"));
    let out = funnel(&["run", &path], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn malformed_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "typo.toml", &CHAIN.replace("t_end", "t_ned"));
    assert_eq!(funnel(&["run", &path], dir.path()).status.code(), Some(2));
    assert_eq!(funnel(&["run", "/nonexistent.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn analyze_reports_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out = funnel(&["analyze", &shipped("linear/mass_on_car_theta0.toml")], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for line in ["r=3", "sign=positive", "minimum-phase"] {
        assert!(text.lines().any(|l| l.trim() == line), "missing {line} in\n{text}");
    }
    assert!(text.contains("-2.000000"));

    let out = funnel(&["analyze", &shipped("linear/no_relative_degree.toml")], dir.path());
    assert!(stdout(&out).contains("no strict relative degree"));
    let out = funnel(&["analyze", &shipped("linear/non_minimum_phase.toml")], dir.path());
    assert!(stdout(&out).contains("not minimum-phase"));
}

#[test]
fn bounds_prints_constants_and_writes_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = funnel(&["bounds", &shipped("bounds_affine.toml")], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("k=1 c=0.816496580928"), "{text}");
    let table = read_csv(fs::File::open(dir.path().join("bounds_affine.bounds.csv")).unwrap()).unwrap();
    assert_eq!(table.header, ["t", "phi", "bound_e0", "bound_e1"]);
    assert_eq!(table.rows.len(), 1001);
    // first envelope is c1/φ(t) with φ(t) = 1 + t
    let c1 = (2.0f64 / 3.0).sqrt();
    for r in &table.rows {
        assert!((r[2] - c1 / (1.0 + r[0])).abs() < 1e-12);
    }
}

#[test]
fn batch_runs_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("scn");
    fs::create_dir(&scn).unwrap();
    write_scenario(&scn, "a.toml", CHAIN);
    write_scenario(&scn, "b.toml", &CHAIN.replace(r#"id = "chain""#, r#"id = "other""#));
    fs::write(scn.join("notes.txt"), "ignored").unwrap();
    let out_dir = dir.path().join("env-out");
    let out = funnel(&["batch", scn.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.trim_start().starts_with("ok")).count(), 2);
    assert!(out_dir.join("chain.csv").is_file() && out_dir.join("other.csv").is_file());

    write_scenario(&scn, "c.toml", &CHAIN.replace("y0 = [0.2, 0.0]", "y0 = [6.0, 1.0]").replace("\"chain\"", "\"far\""));
    let out = funnel(&["batch", scn.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAILED"));
}
