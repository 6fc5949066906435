use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "[run]\nn_max = 12\ngrid_size = 128\nz_points = 6\ncone_orbits = 10\nholder_pairs = 1000\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geolorenz"))
}

fn run(dir: &Path, cfg: &str, args: &[&str]) -> Output {
    let cfg_path = dir.join("run.cfg");
    fs::write(&cfg_path, cfg).unwrap();
    bin()
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn run_dir(out: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8_lossy(&out.stdout).trim())
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_potential_root_matches_scalar_oracle() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), SMALL, &["run"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let dir = run_dir(&out);
    let branches = fs::read_to_string(dir.join("branches.csv")).unwrap();
    let times: Vec<f64> = branches
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(times.len(), 259);
    let sum = |z: f64| times.iter().map(|n| (-n * z).exp()).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 3.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rep = json(&dir.join("case_report.json"));
    let root = rep["body"]["truncated_root"].as_f64().unwrap();
    assert!((root - lo).abs() < 1e-8, "{root} {lo}");
    for f in ["validation.txt", "cones.csv", "lyapunov.csv", "leaf.csv", "spectrum.csv", "pressure_curve.csv"] {
        let text = fs::read_to_string(dir.join(f)).unwrap();
        assert!(text.contains("config_hash"), "{f}");
    }
    let curve = fs::read_to_string(dir.join("pressure_curve.csv")).unwrap();
    assert!(curve.contains("# residual_tol: 1e-8"));
    assert!(curve.contains("Z,log_lambda,tau_mean,free_energy,residual,tail_bound"));
}

#[test]
fn reruns_and_thread_counts_give_identical_reports() {
    let cfg = format!("{SMALL}[potential]\nkind = holder\na = 0.2\nh = 0.5\nb = 0.3\n");
    let mut reports = Vec::new();
    for threads in ["1", "2", "2"] {
        let tmp = TempDir::new().unwrap();
        let out = run(tmp.path(), &cfg, &["--threads", threads, "run"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        reports.push(fs::read(run_dir(&out).join("case_report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[1], reports[2]);
}

#[test]
fn large_cone_aperture_stops_at_validation() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), "[map]\nalpha = 1.2\n", &["run"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("stage validate failed"));
}

#[test]
fn stages_use_cached_upstream_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), SMALL, &["classify"]);
    assert_eq!(out.status.code(), Some(11));
    assert!(stderr(&out).contains("millefeuille.json"), "{}", stderr(&out));
    let out = run(tmp.path(), SMALL, &["millefeuille"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(tmp.path(), SMALL, &["classify"]);
    assert_eq!(out.status.code(), Some(11));
    assert!(stderr(&out).contains("spectrum.json"), "{}", stderr(&out));
    let out = run(tmp.path(), SMALL, &["run", "--stage", "spectrum"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("reusing cached branch table (259 branches)"));
    let out = run(tmp.path(), SMALL, &["classify"]);
    assert_eq!(out.status.code(), Some(11));
    assert!(stderr(&out).contains("pressure.json"), "{}", stderr(&out));
}

#[test]
fn compare_reports_two_bands() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{SMALL}[compare]\ndelta_hat = 0.18\n");
    let out = run(tmp.path(), &cfg, &["millefeuille"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(tmp.path(), &cfg, &["compare"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let c = json(&run_dir(&out).join("comparison.json"));
    assert_eq!(c["body"]["within_tolerance"], true);
    let gap = c["body"]["gap"].as_f64().unwrap();
    assert!(gap > 0.0);
    let out = run(tmp.path(), SMALL, &["compare"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), "[run]\nz_lo = 3\nz_hi = 1\n", &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(tmp.path(), "not a config line\n", &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["--config", "/nonexistent/run.cfg", "validate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
