use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geofeas_cli::commands::KinfeasReport;
use geofeas_cli::output::read_trajectory;
use geofeas_cli::ScenarioConfig;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geofeas"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

/// Writes a variant of the published scenario with `edit` applied to its text.
fn variant(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(scenario("auv3.cfg")).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, edit(text)).unwrap();
    path
}

fn short(text: String) -> String {
    text.replace("steps = 5000", "steps = 40")
}

#[test]
fn published_scenario_writes_all_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run1");
    let o = run(&["simulate", "--config", scenario("auv3.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("trajectory.csv")), 5001);
    assert_eq!(data_rows(&out.join("diagnostics.csv")), 5001);
    assert_eq!(data_rows(&out.join("controls.csv")), 5001);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("regularity: regular"), "{report}");
    assert!(report.contains("max_separation_error_m:"));
    let header = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("t,a1_b1,a1_b2,a1_b3,a1_R11,"));
    assert!(header.ends_with("lambda_1_2_1,lambda_1_3_2,lambda_2_3_3,phi_1_2_1,phi_1_3_2,phi_2_3_3"));
}

#[test]
fn overrides_change_the_run() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let cfg = scenario("auv3.cfg");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--steps", "12", "--h", "0.01", "--method", "euler",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("trajectory.csv")), 13);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("method: euler"));
    assert!(report.contains("steps: 12"));
}

#[test]
fn coincident_agents_exit_two_naming_the_constraint() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(tmp.path(), "clash.cfg", |t| {
        short(t.replace("position = [10.0, 6.6332495807108, 0.0]", "position = [0.0, 0.0, 0.0]"))
    });
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("(1, 2, 1)"), "{}", stderr(&o));
    assert!(!tmp.path().join("x").exists(), "nothing is written for a rejected scenario");
}

#[test]
fn velocity_off_the_constraint_set_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(tmp.path(), "apart.cfg", |t| short(t.replacen("velocity = [0.1, 0.2, 1.0]", "velocity = [1.1, 0.2, 1.0]", 1)));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("constraint (1,3,2)"), "{}", stderr(&o));
}

#[test]
fn mid_run_failure_exits_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenario("auv3_spinning.cfg");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap(),
        "--method", "euler", "--h", "50", "--steps", "200",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("step "), "{}", stderr(&o));
}

#[test]
fn malformed_file_exits_one_with_position() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(tmp.path(), "broken.cfg", |t| t.replace("h = 0.005", "h = = 0.005"));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let line = std::fs::read_to_string(&cfg).unwrap().lines().position(|l| l.starts_with("h = =")).unwrap() + 1;
    assert!(stderr(&o).contains(&format!("broken.cfg:{line}:")), "{}", stderr(&o));
}

#[test]
fn bad_values_name_the_key() {
    let tmp = TempDir::new().unwrap();
    for (name, from, to, key) in [
        ("unknown.cfg", "record_every = 1", "record_evry = 1", "record_evry"),
        ("neg.cfg", "h = 0.005", "h = -0.005", "h"),
        ("method.cfg", "method = \"lie_euler\"", "method = \"rk4\"", "method"),
        ("mass.cfg", "mass = 123.8", "mass = -1.0", "mass"),
    ] {
        let cfg = variant(tmp.path(), name, |t| t.replace(from, to));
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "{name}: {}", stderr(&o));
    }
}

#[test]
fn missing_config_and_bad_flags_exit_one() {
    let o = run(&["simulate", "--config", "/nonexistent/a.cfg", "--out", "/tmp/never"]);
    assert_eq!(code(&o), 1);
    let o = run(&["simulate", "--config", scenario("auv3.cfg").to_str().unwrap(), "--out", "/tmp/never", "--h", "0"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn triangle_rank_and_dimension() {
    let o = run(&["kinfeas", "--config", scenario("triangle.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank 3, nullspace dim 6"));
    assert_eq!(lines.filter(|l| l.starts_with('K')).count(), 6);
}

#[test]
fn kinfeas_json_round_trips() {
    let o = run(&["kinfeas", "--config", scenario("triangle.cfg").to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0);
    let report: KinfeasReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((report.rank, report.nullspace_dim), (3, 6));
    let again: KinfeasReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(report, again);
    // The basis is orthonormal.
    for (a, ra) in report.basis.iter().enumerate() {
        for (b, rb) in report.basis.iter().enumerate() {
            let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
}

#[test]
fn single_agent_spans_the_whole_algebra() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("one.cfg");
    std::fs::write(&cfg, "group = \"SE2\"\n\n[[agent]]\npose = [1.0, 2.0, 0.5]\n").unwrap();
    let o = run(&["kinfeas", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("rank 0, nullspace dim 3"), "{}", stdout(&o));
}

#[test]
fn kinfeas_on_an_infeasible_base_point_exits_two() {
    let tmp = TempDir::new().unwrap();
    let text = std::fs::read_to_string(scenario("triangle.cfg")).unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, text.replace("pose = [0.0, 5.773502691896258, 0.3]", "pose = [0.0, 9.0, 0.3]")).unwrap();
    let o = run(&["kinfeas", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn extract_control_recovers_euler_controls() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("e");
    let cfg = scenario("auv3_spinning.cfg");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--method", "euler", "--steps", "50",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["extract-control", "--traj", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let read = |p: PathBuf| -> Vec<Vec<f64>> {
        let mut r = csv::Reader::from_path(p).unwrap();
        r.records().map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect()).collect()
    };
    let stored = read(out.join("controls.csv"));
    let extracted = read(out.join("controls_extracted.csv"));
    assert_eq!(stored.len(), extracted.len());
    let scale = stored.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    // All but the last sample use the same forward difference as the integrator.
    for (a, b) in stored.iter().zip(&extracted).take(stored.len() - 1) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-6 * scale, "{x} vs {y}");
        }
    }
}

#[test]
fn unconstrained_run_drops_multiplier_columns() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("free");
    let cfg = scenario("auv3.cfg");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--no-constraints", "--steps", "20",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(!text.lines().next().unwrap().contains("lambda"));
    let o = run(&["extract-control", "--traj", out.to_str().unwrap(), "--out", tmp.path().join("u.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&tmp.path().join("u.csv")), 21);
}

#[test]
fn trajectory_reads_back_bit_exactly() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    let cfg_path = scenario("auv3_spinning.cfg");
    let o = run(&["simulate", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--steps", "30"]);
    assert_eq!(code(&o), 0);
    let cfg = ScenarioConfig::load(&cfg_path).unwrap();
    let table = read_trajectory(&out.join("trajectory.csv"), cfg.group, 3, &cfg.graph).unwrap();
    assert_eq!(table.states.len(), 31);
    assert_eq!(table.states[0].g, cfg.initial.g);
    assert_eq!(table.states[0].xi, cfg.initial.xi);
    assert!(table.lambda[5].iter().any(|l| *l != 0.0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = variant(tmp.path(), "det.cfg", |t| t.replace("steps = 5000", "steps = 300"));
    for dir in ["a", "b"] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join(dir).to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for f in ["trajectory.csv", "diagnostics.csv", "controls.csv", "report.txt"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn parallel_jobs_write_separate_directories() {
    let tmp = TempDir::new().unwrap();
    let a = variant(tmp.path(), "first.cfg", short);
    let b = variant(tmp.path(), "second.cfg", |t| short(t).replace("h = 0.005", "h = 0.01"));
    let out = tmp.path().join("sweep");
    let o = run(&[
        "simulate", "--config", a.to_str().unwrap(), "--config", b.to_str().unwrap(),
        "--out", out.to_str().unwrap(), "--jobs", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("first/trajectory.csv").exists());
    assert!(out.join("second/trajectory.csv").exists());
    // Each job matches a solo run of the same file.
    let solo = tmp.path().join("solo");
    assert_eq!(code(&run(&["simulate", "--config", b.to_str().unwrap(), "--out", solo.to_str().unwrap()])), 0);
    assert_eq!(
        std::fs::read(solo.join("trajectory.csv")).unwrap(),
        std::fs::read(out.join("second/trajectory.csv")).unwrap()
    );
}
