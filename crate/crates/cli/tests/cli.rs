use std::path::{Path, PathBuf};
use std::process::Command as Process;

use combidose::harness::{builtin_pack, OperatingCharacteristics, Scenario};
use combidose::report::read_json;
use combidose_cli::{parse_with_env, run, CliError, Command, EXIT_RUNTIME, EXIT_USAGE};

fn write_scenario(dir: &Path, name: &str) -> PathBuf {
    let s: Scenario = builtin_pack().unwrap().get(name).unwrap().clone();
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, s.to_json().unwrap()).unwrap();
    path
}

fn parse(args: &[&str]) -> Result<combidose_cli::RunConfig, CliError> {
    let argv = std::iter::once("combidose").chain(args.iter().copied());
    parse_with_env(argv, None)
}

#[test]
fn simulate_flags_populate_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "calibrated");
    let p = path.to_str().unwrap();
    let cfg = parse(&["simulate-stage1", "--scenario", p, "--seed", "7", "--threads", "3", "--replicates", "12"]).unwrap();
    assert_eq!(cfg.command, Command::SimulateStage1);
    assert_eq!(cfg.scenario.as_deref(), Some(path.as_path()));
    assert_eq!(cfg.master_seed, 7);
    assert_eq!(cfg.parallelism, 3);
    assert_eq!(cfg.overrides.replicates, Some(12));

    let cfg = parse(&["simulate-stage2", "--scenario", p, "--delta-u", "0.9", "--delta-0", "0.15", "--accrual-rate", "2"]).unwrap();
    assert_eq!(cfg.overrides.delta_u, Some(0.9));
    assert_eq!(cfg.overrides.delta_0, Some(0.15));
    assert_eq!(cfg.overrides.accrual_rate, Some(2.0));
}

#[test]
fn thread_count_comes_from_flag_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "calibrated");
    let argv = |extra: &[&'static str]| {
        let mut v = vec!["combidose", "simulate-stage1", "--scenario", path.to_str().unwrap()];
        v.extend_from_slice(extra);
        v.into_iter().map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(parse_with_env(argv(&[]), Some("5".into())).unwrap().parallelism, 5);
    assert_eq!(parse_with_env(argv(&["--threads", "2"]), Some("5".into())).unwrap().parallelism, 2);
    let e = parse_with_env(argv(&[]), Some("many".into())).unwrap_err();
    assert_eq!(e.exit_code(), EXIT_USAGE);
    assert!(e.to_string().contains("COMBIDOSE_THREADS"));
}

#[test]
fn invalid_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "calibrated");
    let p = path.to_str().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["simulate-stage2", "--scenario", p, "--delta-u", "1.5"], "--delta-u"),
        (vec!["simulate-stage2", "--scenario", p, "--delta-0", "0"], "--delta-0"),
        (vec!["simulate-stage2", "--scenario", p, "--accrual-rate=-1"], "--accrual-rate"),
        (vec!["simulate-stage1", "--scenario", p, "--replicates", "0"], "--replicates"),
        (vec!["simulate-stage1", "--scenario", "/no/such/file.json"], "/no/such/file.json"),
        (vec!["simulate-stage1", "--scenario", p, "--bogus"], "--bogus"),
        (vec!["launch"], "launch"),
        (vec![], "Usage"),
    ];
    for (args, needle) in cases {
        let e = parse(&args).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE, "{args:?}");
        assert!(e.to_string().contains(needle), "{args:?}: {e}");
    }
}

#[test]
fn help_is_not_an_error() {
    let e = parse(&["--help"]).unwrap_err();
    assert_eq!(e.exit_code(), 0);
    assert!(e.to_string().contains("simulate-trial"));
}

#[test]
fn stage1_campaign_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "calibrated");
    let out = dir.path().join("out");
    let cfg = parse(&[
        "simulate-stage1",
        "--scenario",
        path.to_str().unwrap(),
        "--replicates",
        "3",
        "--threads",
        "1",
        "--out",
        out.to_str().unwrap(),
    ])
    .unwrap();
    let files = run(&cfg).unwrap();
    let json = out.join("calibrated_none_1.json");
    assert!(files.contains(&json));
    assert!(out.join("calibrated_none_1.csv").is_file());
    let oc: OperatingCharacteristics = read_json(&json).unwrap();
    assert_eq!(oc.replicates, 3);
    assert!(oc.stage1.is_some());
}

#[test]
fn stage2_campaign_needs_a_stage2_truth() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "calibrated");
    let cfg = parse(&["simulate-stage2", "--scenario", path.to_str().unwrap(), "--replicates", "1"]).unwrap();
    assert_eq!(run(&cfg).unwrap_err().exit_code(), EXIT_USAGE);
}

#[test]
fn prior_utilities_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = parse(&["prior-report", "--draws", "2000", "--out", out]).unwrap();
    let files = run(&cfg).unwrap();
    assert_eq!(files.len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("prior_predictive.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);

    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"theta":0.33,"x":0.3333333333333333,"y":0.5,"concentration":7.0,"rho00_ratio":[1.0,3.0],"eta3":[0.8,0.2],"n_draws":2000,"seed":5}"#).unwrap();
    let cfg = parse(&["calibrate-prior", "--spec", spec.to_str().unwrap(), "--out", out]).unwrap();
    run(&cfg).unwrap();
    let result: combidose::calibration::CalibrationResult = read_json(&dir.path().join("calibrated_prior.json")).unwrap();
    assert!((result.prior_mean_prob - 0.33).abs() < 0.02);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_combidose");
    let status = Process::new(bin).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&status.stderr).contains("Usage"));

    let status = Process::new(bin).args(["simulate-stage2", "--scenario", "missing.json"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let status = Process::new(bin)
        .args(["prior-report", "--prior", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_RUNTIME));

    let status = Process::new(bin).arg("--version").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}
