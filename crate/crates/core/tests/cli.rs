use std::path::Path;
use std::process::{Command, Output};

fn shelab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shelab")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn validate_preset_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = shelab(&["validate", "--experiment", "identities"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn invalid_config_exits_2_and_names_the_inequality() {
    let d = tempfile::tempdir().unwrap();
    let o = shelab(&["run", "--experiment", "identities", "--out", "x"], d.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(d.path().join("x/config.toml")).unwrap();
    let bad = text.replace("p0 = 7", "p0 = 5");
    assert_ne!(bad, text);
    std::fs::write(d.path().join("bad.toml"), bad).unwrap();
    let o = shelab(&["validate", "--config", "bad.toml"], d.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("p₀ − 2 > γ₀"));
}

#[test]
fn unreadable_config_is_config_error() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("junk.toml"), "experiment = 3\nnot toml [").unwrap();
    assert_eq!(code(&shelab(&["validate", "--config", "junk.toml"], d.path())), 2);
    assert_eq!(code(&shelab(&["validate", "--config", "missing.toml"], d.path())), 2);
    assert_eq!(code(&shelab(&["validate"], d.path())), 2);
}

#[test]
fn density_run_refuses_small_samples() {
    let d = tempfile::tempdir().unwrap();
    let o = shelab(&["run", "--experiment", "density_f", "--paths", "10", "--out", "x"], d.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient samples"));
}

#[test]
fn run_then_report_and_detect_tampering() {
    let d = tempfile::tempdir().unwrap();
    let o = shelab(&["run", "--experiment", "gamma22_moments", "--paths", "300", "--seed", "9", "--out", "g"], d.path());
    // small samples may fail a statistical check, but never a config or IO error
    let run_code = code(&o);
    assert!(run_code <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("g/manifest.json").exists());
    assert_eq!(code(&shelab(&["report", "--out", "g"], d.path())), run_code);
    let f = d.path().join("g/gamma22.csv");
    let mut b = std::fs::read(&f).unwrap();
    b.push(b'\n');
    std::fs::write(&f, b).unwrap();
    let o = shelab(&["report", "--out", "g"], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("checksum mismatch: gamma22.csv"));
}

#[test]
fn report_on_missing_run_is_io_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&shelab(&["report", "--out", "nothing"], d.path())), 3);
}

#[test]
fn seed_flag_changes_batches_and_resume_keeps_them() {
    let d = tempfile::tempdir().unwrap();
    let args = |seed: &'static str, out: &'static str| vec!["run", "--experiment", "walsh_scaling", "--paths", "200", "--seed", seed, "--out", out];
    assert!(code(&shelab(&args("1", "a"), d.path())) <= 1);
    assert!(code(&shelab(&args("2", "b"), d.path())) <= 1);
    let a = std::fs::read(d.path().join("a/walsh.csv")).unwrap();
    assert_ne!(a, std::fs::read(d.path().join("b/walsh.csv")).unwrap());
    let mut r = args("1", "a");
    r.push("--resume");
    assert!(code(&shelab(&r, d.path())) <= 1);
    assert_eq!(a, std::fs::read(d.path().join("a/walsh.csv")).unwrap());
}
