use std::path::Path;
use std::process::Command;

fn cmltraj() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmltraj"))
}

fn run_in(dir: &Path, args: &[&str]) -> std::process::Output {
    cmltraj()
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn fig1_writes_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["fig1", "--runs", "3", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("model,run,k,x,y"));
    // 2 models x 3 runs x 101 time steps.
    assert_eq!(lines.count(), 2 * 3 * 101);
    assert!(csv.contains("\ncml,2,100,"));
    assert!(csv.contains("\nmarkov,0,0,"));
}

#[test]
fn fig1_is_byte_identical_across_invocations() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_in(a.path(), &["fig1", "--runs", "1", "--workers", "1"]);
    run_in(b.path(), &["fig1", "--runs", "1", "--workers", "3"]);
    assert_eq!(
        std::fs::read(a.path().join("fig1.csv")).unwrap(),
        std::fs::read(b.path().join("fig1.csv")).unwrap()
    );
}

#[test]
fn fig2_writes_curves_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["fig2", "--runs", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("horizon,aee_cml,aee_markov,log10_aee_cml,log10_aee_markov")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 92);
    assert!(rows[0].starts_with("9,") && rows[91].starts_with("100,"));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("terminal_ratio="));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "q = -1\n").unwrap();
    let out = run_in(dir.path(), &["fig1", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`q`"));

    std::fs::write(&bad, "dt = [\n").unwrap();
    let out = run_in(dir.path(), &["fig2", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn empty_config_matches_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_in(&a, &["fig1", "--runs", "2", "--config", cfg.to_str().unwrap()]);
    run_in(&b, &["fig1", "--runs", "2"]);
    assert_eq!(
        std::fs::read(a.join("fig1.csv")).unwrap(),
        std::fs::read(b.join("fig1.csv")).unwrap()
    );
}

#[test]
fn check_reports_every_suite() {
    let out = cmltraj().arg("check").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 8);
}
