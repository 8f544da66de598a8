use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn slag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slag")).args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn report_has_one_entry_per_criterion() {
    let o = slag(&["verify"]);
    let v = json(&o);
    let checks = v["checks"].as_array().unwrap();
    let registry = slag::verify::criteria();
    assert_eq!(checks.len(), registry.len());
    for c in &registry {
        let n = checks.iter().filter(|k| k["name"] == c.name).count();
        assert_eq!(n, 1, "{}", c.name);
    }
    for k in checks {
        for key in ["name", "status", "value", "tolerance", "seconds"] {
            assert!(k.get(key).is_some(), "{key}");
        }
    }
    let count = |s: &str| checks.iter().filter(|k| k["status"] == s).count() as u64;
    assert_eq!(v["passed"], count("pass"));
    assert_eq!(v["failed"], count("fail"));
    assert_eq!(v["exploratory"], 1);
    let expected = if count("fail") == 0 { 0 } else { 1 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn only_filters_by_module() {
    let o = slag(&["verify", "--only", "freeboundary", "--brief"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["k-geometry", "third-derivative-jump", "determinant-sign"]);
    assert!(v["checks"][0].get("detail").is_none());
}

#[test]
fn large_lambda_fails_the_scaling_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.ini", "[explicit]\nlambda = 0.5\n");
    let o = slag(&["-c", &cfg, "verify", "--only", "explicit"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    let bad: Vec<&Value> = v["checks"].as_array().unwrap().iter().filter(|c| c["status"] == "fail").collect();
    assert_eq!(bad.len(), 1);
    assert_eq!(bad[0]["name"], "angle-scaling");
}

#[test]
fn default_scaling_check_passes() {
    let o = slag(&["verify", "--only", "explicit"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.ini", "[solver]\ntol = 1e-9\nspeed = fast\n");
    let o = slag(&["-c", &cfg, "eval", "0,0,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("speed"));
    assert_eq!(slag(&["verify", "--only", "nowhere"]).status.code(), Some(2));
    assert_eq!(slag(&["--set", "explicit.lambda=x", "eval", "0,0,0"]).status.code(), Some(2));
    assert_eq!(slag(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn io_failures_exit_three() {
    assert_eq!(slag(&["-c", "/nonexistent/c.ini", "eval", "0,0,0"]).status.code(), Some(3));
    let o = slag(&["export", "phi", "-o", "/nonexistent/dir/f.slf"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exported_slf_has_header_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("phi.slf");
    let o = slag(&["export", "phi", "--half", "0.02", "--h", "0.01", "-o", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 126);
    let f = slag::io::read_field(&p).unwrap();
    assert_eq!(f.dims, [5, 5, 5]);
}

#[test]
fn export_formats_follow_extension() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let vtk = dir.path().join("t.vtk");
    for p in [&csv, &vtk] {
        let o = slag(&["export", "theta", "--half", "0.02", "--h", "0.01", "-o", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("x,y,z,value\n"));
    assert!(std::fs::read_to_string(&vtk).unwrap().contains("POINT_DATA 125"));
}

#[test]
fn eval_reports_the_origin() {
    let o = slag(&["eval", "0,0,0"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["inside_k"], true);
    assert!(v["grad_theta"].as_array().unwrap().iter().all(|g| g.as_f64().unwrap().abs() < 1e-12));
}

#[test]
fn model_solve_writes_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.vtk");
    let o = slag(&["solve", "--problem", "model", "--h", "0.25", "-o", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["report"]["converged"], true);
    assert!(std::fs::read_to_string(&p).unwrap().starts_with("# vtk DataFile"));
}

#[test]
fn rotate_reports_origin_and_z() {
    let o = slag(&["rotate", "--eps-r", "0.002"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["origin"]["lambda3_err"].as_f64().unwrap() < 1e-12);
    assert!(v["z"]["points"].as_u64().unwrap() > 0);
}
