use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shrinker-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 4] = ["--nodes", "64", "--axial", "65"];

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["profile", "solve", "--p", "2"]).status.code(), Some(2));
    assert_eq!(
        run(&["grid", "build", "--round-k", "1", "--p", "2", "--q", "3"]).status.code(),
        Some(2)
    );
}

#[test]
fn inadmissible_curve_is_a_numerical_abort() {
    let o = run(&["profile", "solve", "--p", "1", "--q", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NoSuchCurve"));
}

#[test]
fn solve_then_check_curve_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("al23.txt");
    let p = path.to_str().unwrap();
    let o = run(&["profile", "solve", "--p", "2", "--q", "3", "--nodes", "256", "-o", p]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("pass"));
    let o = run(&["profile", "check", p]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("nodes 256"));
    assert!(!dir.path().join("al23.txt.partial").exists());
}

#[test]
fn missing_file_is_an_io_error() {
    let o = run(&["profile", "check", "/nonexistent/curve.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Io"));
}

#[test]
fn grid_reports_gaussian_area() {
    let o = run(&[&["grid", "build"][..], &SMALL].concat());
    assert!(o.status.success());
    assert!(stdout(&o).contains("F 1.520346901"));
}

#[test]
fn kernel_and_variation_checks_pass() {
    let o = run(&[&["kernel", "verify"][..], &SMALL].concat());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("yy-H"));
    let o = run(&[&["variation", "check", "--fields", "1"][..], &SMALL].concat());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("diagnostic"));
}

#[test]
fn geometry_csv_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geo.csv");
    let o = run(&[&["geometry", "eval", "-o", path.to_str().unwrap()][..], &SMALL].concat());
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 64 * 65);
}

#[test]
fn round_constant() {
    let o = run(&[&["constants", "--round-k", "1"][..], &SMALL].concat());
    assert!(o.status.success());
    assert!(stdout(&o).contains("target 2.000000 measured 2.000000"));
    let o = run(&["constants", "--round-k", "2"]);
    assert!(stdout(&o).contains("target 0.250000"));
}

#[test]
fn interpolation_sweep() {
    let o = run(&["interp", "check", "--n", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("bounded"));
    let o = run(&["interp", "check", "--omegas", "4,2"]);
    assert_eq!(o.status.code(), Some(1));
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn loja_sweep_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[cylinder]\nprofile_nodes = 64\naxial_nodes = 65\n[family]\neps_ladder = [0.1, 0.03, 0.01]\n",
    )
    .unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}"));
        let o = bin()
            .env("SHRINKER_LAB_THREADS", threads)
            .args(["loja", "sweep", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["loja_report.json", "loja_report.txt", "loja_sweep.csv", "manifest.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let manifest = read_json(&out.join("manifest.json"));
        assert_eq!(manifest["seed"], 1);
        assert_eq!(manifest["config"]["cylinder"]["profile_nodes"], 64);
        reports.push(std::fs::read_to_string(out.join("loja_report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: serde_json::Value = serde_json::from_str(&reports[0]).unwrap();
    let names: Vec<&str> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    for n in ["ord1-h", "dtau-p", "p-est", "lojasiewicz-first", "lojasiewicz-gradient"] {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "unknown_key = 3\n").unwrap();
    let o = run(&["loja", "sweep", "--config", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = bin().env("SHRINKER_LAB_THREADS", "many").args(["grid", "build"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
