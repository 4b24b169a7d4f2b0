//! Runs the `specstab` binary end to end on small configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specstab"))
}

fn quick_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(quick_config()).unwrap();
    let path = dir.join("edited.toml");
    std::fs::write(&path, edit(text)).unwrap();
    path
}

#[test]
fn study_passes_and_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = dir.path().to_str().unwrap();
    let first = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    assert!(stdout(&first).contains("PASS series r=3: slope"));
    let a = std::fs::read(dir.path().join("quick.csv")).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("quick.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["schema_version"], 1);
    assert_eq!(json["result"]["records"].as_array().unwrap().len(), 3);

    let again = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out, "--format", "csv"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(a, std::fs::read(dir.path().join("quick.csv")).unwrap());
}

#[test]
fn poisson_and_solve_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = dir.path().to_str().unwrap();
    let p = run(&["poisson", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(p.status.code(), Some(0), "{}", stdout(&p));
    assert!(dir.path().join("quick_poisson.csv").exists());

    let s = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out, "--count", "4", "--format", "json"]);
    assert_eq!(s.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("quick_eigen.json")).unwrap()).unwrap();
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 4);
    assert!(values.windows(2).all(|w| w[0].as_f64() <= w[1].as_f64()));
    assert!(!dir.path().join("quick_eigen.csv").exists());
}

#[test]
fn mesh_reports_free_dofs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config();
    let out = dir.path().to_str().unwrap();
    let o = run(&["mesh", "--config", cfg.to_str().unwrap(), "--out", out, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("110 free DOFs"));
    let text = std::fs::read_to_string(dir.path().join("quick_mesh.txt")).unwrap();
    let counts: Vec<usize> = text.lines().next().unwrap().split_whitespace().map(|c| c.parse().unwrap()).collect();
    assert_eq!(&counts[..2], &[121, 200]);
    let csv = std::fs::read_to_string(dir.path().join("quick_mesh.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("triangle,")).count(), 200);
}

#[test]
fn mf_of_a_constant_source_is_c_sqrt_s() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |t| {
        t.replace(
            r#"source = { kind = "gaussian", center = [0.5, 0.8], width = 0.2, amplitude = 1.0 }"#,
            r#"source = { kind = "constant", value = 3.0 }"#,
        )
    });
    let o = run(&["mf", "--config", cfg.to_str().unwrap(), "--area", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 1.5).abs() < 1e-12, "{v}");
}

#[test]
fn verify_battery_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 7);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["study"]).status.code(), Some(2));
    assert_eq!(run(&["study", "--config", "/no/such/file.toml"]).status.code(), Some(2));
    let increasing = write_config(dir.path(), |t| t.replace("[0.1, 0.05, 0.025]", "[0.025, 0.05, 0.1]"));
    let o = run(&["study", "--config", increasing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly decreasing"));
    assert_eq!(run(&["study", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Amplitude 0.6 pushes the top graph out of its band.
    let cfg = write_config(dir.path(), |t| t.replace("[0.1, 0.05, 0.025]", "[0.6, 0.05, 0.025]"));
    let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
