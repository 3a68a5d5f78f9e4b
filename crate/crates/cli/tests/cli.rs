use std::path::PathBuf;
use std::process::{Command, Output};

fn preset() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets/table1.toml")
}

fn seqduel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqduel"))
        .args(args)
        .env_remove("SEQDUEL_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_writes_summary_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let o = seqduel(&[
        "run",
        "--config",
        preset().to_str().unwrap(),
        "--trials",
        "200",
        "--trajectories",
        "3,1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.toml")).unwrap();
    assert_eq!(summary, stdout(&o));
    assert!(summary.starts_with("n_trials = 200\nbeta = 0.0500000\n"));
    let csv = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("trial,iteration,agent,belief_theta1,min_component,signal_theta1,decision")
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("3,1,A,"), "{first}");
    assert!(csv.lines().any(|l| l.starts_with("1,1,B,")));
}

#[test]
fn single_trial_runs_are_byte_identical() {
    let config = preset();
    let args = [
        "run",
        "--config",
        config.to_str().unwrap(),
        "--trials",
        "1",
        "--seed",
        "7",
    ];
    let a = seqduel(&args);
    let b = seqduel(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_flag_beats_environment_beats_file() {
    let config = preset();
    let config = config.to_str().unwrap();
    let run = |seed_flag: Option<&str>, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_seqduel"));
        cmd.args(["run", "--config", config, "--trials", "50"])
            .env_remove("SEQDUEL_SEED");
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("SEQDUEL_SEED", e);
        }
        cmd.output().unwrap().stdout
    };
    // The preset file says seed = 7.
    assert_eq!(run(None, None), run(Some("7"), None));
    assert_eq!(run(None, Some("11")), run(Some("11"), None));
    assert_eq!(run(Some("7"), Some("11")), run(None, None));
    assert_ne!(run(Some("11"), None), run(Some("7"), None));
}

#[test]
fn bad_pmf_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(preset()).unwrap().replace(
        "pmf_theta1 = [0.4, 0.05, 0.35, 0.1, 0.1]",
        "pmf_theta1 = [0.4, 0.05, 0.35, 0.1, 0.0]",
    );
    std::fs::write(&path, text).unwrap();
    let o = seqduel(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("agents[1].pmf_theta1"), "{err}");
    assert!(err.contains("line "), "{err}");
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(preset())
        .unwrap()
        .replace("trials = 10000", "trails = 10000");
    std::fs::write(&path, text).unwrap();
    let o = seqduel(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`trails`"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_exits_2() {
    let o = seqduel(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_quick_passes_and_negative_control_fails() {
    let o = seqduel(&["verify", "--quick"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    for suite in [
        "alpha-optimality",
        "fusion-weight",
        "simultaneous-stop",
        "error-bounds",
        "martingale",
    ] {
        let line = text.lines().find(|l| l.starts_with(suite)).unwrap();
        assert!(line.contains("PASS"), "{line}");
    }
    let o = seqduel(&["verify", "--quick", "--inject-alpha-bug"]);
    assert_eq!(o.status.code(), Some(3));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("alpha-optimality"))
        .unwrap()
        .to_string();
    assert!(line.contains("FAIL") && line.contains("claimed 0.9"), "{line}");
}

#[test]
fn reproduce_reports_bands() {
    let dir = tempfile::tempdir().unwrap();
    let o = seqduel(&["reproduce-paper", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("MISS"));
    for f in [
        "kl.txt",
        "summary_beta_0.05.toml",
        "summary_beta_0.01.toml",
        "trajectories_beta_0.05.csv",
        "report.txt",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // A single trial cannot land in every band.
    let o = seqduel(&["reproduce-paper", "--trials", "1", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("MISS"));
}

#[test]
fn alpha_sweep_prints_the_grid() {
    let o = seqduel(&["sweep", "alpha", "--belief", "0.1", "--step", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("alpha,g\n0.00000,0.100000\n"), "{text}");
    assert!(text.contains("0.500000,0.500000\n"));
    assert!(text.contains("# argmax = 0.500000"));
    let o = seqduel(&["sweep", "alpha", "--belief", "0.1", "--step", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn w_sweep_requires_unit_weight() {
    let o = seqduel(&["sweep", "w", "--grid", "0,0.5", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = seqduel(&["sweep", "w", "--grid", "0.5,1", "--trials", "500", "--agent", "a"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# test_agent = A"));
}
