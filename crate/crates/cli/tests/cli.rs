use std::path::Path;
use std::process::{Command, Output};

fn delaylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaylab"))
        .args(args)
        .env("DELAYLAB_THREADS", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONFIG: &str = r#"name = "tiny"
episodes = 200
eval_cadence = 10

[env]
kind = "bandit"
players = 1
horizon = 1
states = 1
actions = [2]
rewards = [[[[0.8], [0.3]]]]

[algo]
kind = "batched_elim"

[delay]
kind = "poisson"
params = { lambda = 2.0 }

[seeds]
count = 2

[output]
dir = "out"
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csvs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", CONFIG);
    let o = delaylab(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean final regret"));
    let out = dir.path().join("out");
    for f in ["tiny_seed0.csv", "tiny_seed1.csv", "tiny_summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    // 20 cadence rows plus the header
    let csv = std::fs::read_to_string(out.join("tiny_seed0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);

    let fit = delaylab(&[
        "fit",
        "--input",
        out.join("tiny_seed0.csv").to_str().unwrap(),
        "--model",
        "affine",
    ]);
    assert!(fit.status.success(), "{}", stderr(&fit));
    assert!(stdout(&fit).starts_with("slope "));
}

#[test]
fn bad_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &CONFIG.replace("episodes = 200", "episodes = 0"));
    let o = delaylab(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:2:"), "{}", stderr(&o));

    let cfg = write(dir.path(), "typo.toml", &CONFIG.replace("[seeds]", "[seeds]\ncuont = 3"));
    let o = delaylab(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("typo.toml:"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = delaylab(&["run", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_over_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", CONFIG);
    let grid = write(
        dir.path(),
        "grid.toml",
        "episodes = [100, 200, 400]\ndelay_means = [0.0, 3.0, 6.0]\n",
    );
    let o = delaylab(&["sweep", "--config", &cfg, "--grid", &grid]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("K=")).count(), 9 + 3);
    assert!(dir.path().join("out/tiny_grid.csv").exists());
    assert!(dir.path().join("out/tiny_grid.json").exists());
}

#[test]
fn verify_single_criterion() {
    let o = delaylab(&["verify", "--only", "7"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("criterion  7 PASS"));

    let o = delaylab(&["verify", "--only", "11"]);
    assert_eq!(o.status.code(), Some(2));
}
