use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn toriclab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toriclab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TORICLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn enumerate_writes_the_rotated_d4_row() {
    let dir = tempfile::tempdir().unwrap();
    ok(&toriclab(&["enumerate", "--orientation", "rotated", "--d", "4"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("table1_2_enumeration.csv")).unwrap();
    assert!(csv.starts_with("orientation,d,w,policy,class,count\n"));
    assert!(csv.contains("rotated,4,2,implemented,straight,48\n"));
    assert!(csv.contains("rotated,4,2,implemented,diagonal,8\n"));
    assert!(dir.path().join("enumerate.json").exists());
}

#[test]
fn threshold_bound_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&toriclab(&["model", "--op", "threshold-bound"], dir.path()));
    assert_eq!(stdout.trim(), "0.0373");
}

#[test]
fn monte_carlo_output_is_byte_identical() {
    let args = ["mc", "--d", "4", "--orientation", "rotated", "--p", "0.05", "--eta", "1e6", "--seed", "7"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&toriclab(&args, a.path()));
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "3"]);
    ok(&toriclab(&with_workers, b.path()));
    let file = "fig2_4_failure_rates.csv";
    let x = fs::read(a.path().join(file)).unwrap();
    assert_eq!(x, fs::read(b.path().join(file)).unwrap());
    assert!(String::from_utf8(x).unwrap().contains("rotated,4,16,0.05,1000000,"));
}

#[test]
fn sidecar_reruns_the_same_experiment() {
    let a = tempfile::tempdir().unwrap();
    ok(&toriclab(&["mc", "--d", "4,6", "--p", "0.08", "--eta", "2000", "--seed", "3"], a.path()));
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("mc.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 3);
    assert_eq!(sidecar["config"]["command"]["name"], "mc");

    // point the stored config at a fresh directory and run it again
    let b = tempfile::tempdir().unwrap();
    let mut cfg = sidecar["config"].clone();
    cfg["out"] = serde_json::Value::String(b.path().to_string_lossy().into_owned());
    let path = b.path().join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_toriclab")).arg("--config").arg(&path).output().unwrap();
    ok(&out);
    let file = "fig2_4_failure_rates.csv";
    assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap());
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["mc", "--d", "5", "--p", "0.05"],
        vec!["mc", "--d", "4", "--p", "0.7"],
        vec!["split", "--d", "4", "--p0", "0.1", "--p-anchor", "0.05"],
        vec!["mc", "--d", "4"],
    ] {
        let out = toriclab(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = toriclab(&["mc", "--d", "5", "--p", "0.05"], dir.path());
    let diag: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(diag["error"], "config");
}

#[test]
fn pathcount_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(&toriclab(&["pathcount", "--d", "4,6"], dir.path()));
    let csv = fs::read_to_string(dir.path().join("pathcount.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("4,24,22,104,"));
}

#[test]
fn split_and_walks_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    ok(&toriclab(
        &["split", "--d", "4", "--p-anchor", "0.1", "--p0", "0.01", "--anchor-eta", "1e4", "--steps", "2e4"],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("fig5_split.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);

    ok(&toriclab(&["walks", "--d", "4,6,8,10", "--samples", "2000", "--lhat", "1.5"], dir.path()));
    let fits = fs::read_to_string(dir.path().join("fig6_extrapolation.csv")).unwrap();
    assert!(fits.contains("rotated,1.5,"));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&toriclab(&["verify", "--eta", "1e5"], dir.path()));
    assert!(!stdout.contains("FAILED"));
}
