use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_masym"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn certify_exact_quadratic_fixture_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixture("certify_quadratic.json"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = read_json(&tmp.path().join("certificate.json"));
    assert_eq!(cert["pass"], Value::Bool(true));
    assert!(!tmp.path().join(".lock").exists());
}

#[test]
fn failed_certificate_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{
  "command": "certify",
  "domain": { "shape": "ball", "center": [0.0, 0.0], "radius": 1.0 },
  "solution": { "kind": "expr", "fields": ["x1^3"] },
  "fd": { "h": 0.0625 }
}"#,
    );
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let cert = read_json(&tmp.path().join("out/certificate.json"));
    assert_eq!(cert["pass"], Value::Bool(false));
    assert!(!cert["failures"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_key_is_a_line_precise_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        "{\n  \"command\": \"solve-radial\",\n  \"radial\": { \"n\": 2, \"power\": [1, 1] },\n  \"bogus\": 3\n}\n",
    );
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("bad.json:4:"), "{err}");
}

#[test]
fn semantic_errors_name_the_offending_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "neg.json",
        "{\n  \"command\": \"solve-grid\",\n  \"domain\": { \"shape\": \"ball\", \"center\": [0, 0], \"radius\": 1 },\n  \"system\": { \"dim\": 2, \"components\": [{ \"f\": \"1\" }] },\n  \"fd\": { \"h\": -0.1 }\n}\n",
    );
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("neg.json:5:"), "{err}");

    let cfg = write_config(
        tmp.path(),
        "missing.json",
        "{\n  \"command\": \"certify\",\n  \"domain\": { \"shape\": \"ball\", \"center\": [0, 0], \"radius\": 1 },\n  \"solution\": { \"kind\": \"file\", \"path\": \"nope.csv\" }\n}\n",
    );
    let o = run(&cfg, &tmp.path().join("out2"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json:4:"));
}

#[test]
fn divergence_exits_three_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "div.json",
        r#"{
  "command": "solve-radial",
  "radial": { "n": 2, "source": "1 - z1" },
  "radial_options": { "max_iter": 2, "tol": 1e-14 }
}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let rep = read_json(&out.join("divergence.json"));
    assert_eq!(rep["iterations"], Value::from(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("divergence.json"));
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join(".lock"), b"").unwrap();
    let o = run(&fixture("solve_radial_quadratic.json"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}

#[test]
fn manifest_hashes_match_the_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixture("solve_grid_power.json"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&tmp.path().join("manifest.json"));
    let arts = m["artifacts"].as_array().unwrap();
    assert!(arts.len() >= 5);
    for a in arts {
        let bytes = std::fs::read(tmp.path().join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    let svg = std::fs::read_to_string(tmp.path().join("u1.svg")).unwrap();
    assert!(svg.contains("<!-- masym solve-grid") && svg.contains("config-sha256="));
}

#[test]
fn solve_radial_writes_profile_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixture("solve_radial_power.json"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&tmp.path().join("summary.json"));
    assert_eq!(s["outcome"], "solution");
    let c = s["center_values"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() - c[1].as_f64().unwrap()).abs() < 1e-8);
    let csv = std::fs::read_to_string(tmp.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("r,u1,du1,u2,du2\n"));
    assert_eq!(csv.lines().count(), 1026);
}

#[test]
fn trichotomy_table_marks_the_critical_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        r#"{
  "command": "sweep-trichotomy",
  "trichotomy": { "n": 2, "pairs": [[1, 1], [1, 2], [2, 2], [2, 3]] },
  "radial_options": { "grid_size": 512 }
}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_json(&out.join("trichotomy.json"));
    let outcomes: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["outcome"].as_str().unwrap()).collect();
    assert_eq!(outcomes, ["solution", "solution", "no_solution", "solution"]);
}

#[test]
fn hypotheses_catch_a_planted_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixture("hypotheses_power.json"), &tmp.path().join("ok"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(fixture("hypotheses_power.json")).unwrap().replace("(-z2)^1", "z2");
    let cfg = write_config(tmp.path(), "planted.json", &text);
    let o = run(&cfg, &tmp.path().join("bad"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let rep = read_json(&tmp.path().join("bad/hypotheses.json"));
    let failed = rep["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["status"] == "fail")
        .expect("a failing hypothesis");
    assert!(failed.get("witness").is_some());
}

#[test]
fn linearize_reports_fields_and_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&fixture("linearize_power.json"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&tmp.path().join("linearization.json"));
    assert_eq!(s["inequality"]["violations"], Value::from(0));
    assert!(s["nodes"].as_u64().unwrap() > 50);
    let csv = std::fs::read_to_string(tmp.path().join("linearization.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("d12"));
}

#[test]
fn reruns_are_byte_identical() {
    for f in ["solve_grid_power.json", "hypotheses_power.json", "certify_quadratic.json"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run(&fixture(f), a.path(), &["--seed", "11"]).status.code(), Some(0));
        assert_eq!(run(&fixture(f), b.path(), &["--seed", "11"]).status.code(), Some(0));
        let ma = std::fs::read(a.path().join("manifest.json")).unwrap();
        let mb = std::fs::read(b.path().join("manifest.json")).unwrap();
        assert_eq!(ma, mb, "{f}");
    }
}
