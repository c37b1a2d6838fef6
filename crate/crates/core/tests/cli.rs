use std::path::Path;
use std::process::{Command, Output};

fn bf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfactory")).args(args).output().expect("spawn bfactory")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn compile_writes_hashed_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "plan.json");
    let o = bf(&["compile", "p/(p+1/5)", "--domain", "1/10:2/5", "--backend", "approx:2000", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["hash"].as_str().unwrap().len(), 64);
}

#[test]
fn compile_diagnostics_exit_2() {
    let o = bf(&["compile", "p+p", "--domain", "1/10:1/2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("1/5, 1]"), "{}", text(&o));
    let o = bf(&["compile", "p +"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("byte 3"), "{}", text(&o));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    for (r, t) in [(&a, "1"), (&b, "3")] {
        let o = bf(&[
            "simulate",
            "--target",
            "walk:2000",
            "--p",
            "1/4",
            "--runs",
            "20000",
            "--seed",
            "42",
            "--report",
            r,
            "--threads",
            t,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    let ra = std::fs::read(&a).unwrap();
    assert_eq!(ra, std::fs::read(&b).unwrap());
    let rep: bfactory::verify::SimulationReport = serde_json::from_slice(&ra).unwrap();
    let (lo, hi) = rep.interval();
    let half = bfactory::rational::rat(1, 2);
    assert!(lo <= half && half <= hi);
}

#[test]
fn simulate_missing_plan_exit_1() {
    let o = bf(&["simulate", "--plan", "/nonexistent/plan.json", "--p", "1/2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_needs_one_target() {
    let o = bf(&["simulate", "--p", "1/2"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn verify_idle_doubling_bracket() {
    let o = bf(&["verify", "--target", "double:3/25", "--depth", "16", "--p", "1/4"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("bracket [0, 1]"));
    let o = bf(&["verify", "--target", "fair", "--depth", "21", "--p", "1/4"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn envelope_dump_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(&dir, "env.csv");
    let o = bf(&["envelope", "--target", "monomial:2", "--max-n", "64", "--dump", &csv]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("0 violation"));
    let good = std::fs::read_to_string(&csv).unwrap();
    let bad = good.replace("\n4,2,1,1\n", "\n4,2,6,6\n");
    assert_ne!(good, bad);
    let bad_path = path(&dir, "bad.csv");
    std::fs::write(&bad_path, bad).unwrap();
    let o = bf(&["envelope", "--target", &format!("csv:{bad_path}"), "--max-n", "64"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).contains("n=4 k=2"), "{}", text(&o));
}

#[test]
fn tails_from_report() {
    let dir = tempfile::tempdir().unwrap();
    let rep = path(&dir, "fair.json");
    let o = bf(&["simulate", "--target", "fair", "--p", "3/10", "--runs", "50000", "--report", &rep]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = bf(&["tails", "--report", &rep]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(fit["geometric"], true);
    assert!(!Path::new(&path(&dir, "missing.json")).exists());
    assert_eq!(bf(&["tails", "--report", &path(&dir, "missing.json")]).status.code(), Some(1));
}
