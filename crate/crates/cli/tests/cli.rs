use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddim")).current_dir(dir).args(args).output().expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{}").unwrap();
    dir
}

#[test]
fn region_smoke_csv_has_four_rows() {
    let d = setup();
    let o = ddim(d.path(), &["region", "--config", "c.json", "--set", "resolution=2", "--no-timestamp"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("region.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tau,alpha,verdict,lambda_sum_sign,nu,margin");
    assert_eq!(lines.len(), 5);
    let svg = fs::read_to_string(d.path().join("region.svg")).unwrap();
    assert!(svg.contains(r#"width="800" height="600""#));
}

#[test]
fn beta_reports_the_closed_form() {
    let d = setup();
    let o =
        ddim(d.path(), &["beta", "--config", "c.json", "--set", "m=32", "--set", "restarts=2", "--set", "tolerance=1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("beta.json")).unwrap()).unwrap();
    assert_eq!(v["analytic"], 1.625);
    assert_eq!(v["betas"].as_array().unwrap().len(), 2);
}

#[test]
fn stationary_simulation_stays_put() {
    let d = setup();
    fs::write(d.path().join("s.json"), r#"{"alpha": 0.3, "history": "stationary", "t_end": 10}"#).unwrap();
    let o = ddim(d.path(), &["simulate", "--config", "s.json"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(d.path().join("simulate.csv")).unwrap();
    let x0 = 0.7f64.sqrt();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let x: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((x - x0).abs() <= 1e-9);
        rows += 1;
    }
    assert_eq!(rows, 641);
}

#[test]
fn usage_errors_exit_with_one() {
    let d = setup();
    let o = ddim(d.path(), &["dimension"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("\"samples\"") && err.contains("\"spacing\""), "{err}");

    fs::write(d.path().join("bad.json"), r#"{"alpah": 0.5}"#).unwrap();
    assert_eq!(ddim(d.path(), &["beta", "--config", "bad.json"]).status.code(), Some(1));
    assert_eq!(ddim(d.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(ddim(d.path(), &["roots", "--config", "missing.json"]).status.code(), Some(1));
    assert_eq!(ddim(d.path(), &["roots", "--config", "c.json", "--set", "alpha=2"]).status.code(), Some(1));
    assert_eq!(ddim(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn failed_contract_exits_with_two_after_writing() {
    let d = setup();
    let o = ddim(d.path(), &["trace-check", "--config", "c.json", "--set", "tolerance=1e-12", "--set", "ms=[16, 32]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(d.path().join("trace_check.json").exists());
}

#[test]
fn outputs_are_reproducible() {
    let a = setup();
    let b = setup();
    for dir in [a.path(), b.path()] {
        assert_eq!(
            ddim(dir, &["simulate", "--config", "c.json", "--seed", "5", "--set", "t_end=5"]).status.code(),
            Some(0)
        );
        let o = ddim(dir, &["region", "--config", "c.json", "--set", "resolution=3"]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(ddim(dir, &["roots", "--config", "c.json"]).status.code(), Some(0));
    }
    for f in ["simulate.csv", "region.csv", "roots.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let strip = |p: &Path| {
        fs::read_to_string(p.join("region.svg"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("<!--"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(a.path()), strip(b.path()));

    // a different seed changes the random history
    ddim(b.path(), &["simulate", "--config", "c.json", "--seed", "6", "--set", "t_end=5"]);
    assert_ne!(fs::read(a.path().join("simulate.csv")).unwrap(), fs::read(b.path().join("simulate.csv")).unwrap());
}

#[test]
fn thread_count_from_the_environment() {
    let d = setup();
    let o = Command::new(env!("CARGO_BIN_EXE_ddim"))
        .current_dir(d.path())
        .args(["region", "--config", "c.json", "--set", "resolution=2", "--out", "sub/dir"])
        .env("DDIM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(d.path().join("sub/dir/region.csv").exists());
    let bad = Command::new(env!("CARGO_BIN_EXE_ddim"))
        .current_dir(d.path())
        .args(["roots", "--config", "c.json"])
        .env("DDIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
