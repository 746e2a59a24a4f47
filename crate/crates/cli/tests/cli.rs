use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn abe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abe"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_scenario_exits_with_usage_status() {
    let out = abe(&["--scenario", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("9"));
}

#[test]
fn small_sweep_writes_results_sidecar_and_surface() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    let surface = dir.path().join("surface.csv");
    let out = abe(&[
        "--T", "2000", "--T", "1000", "--replications", "2",
        "--out", path_str(&results),
        "--surface-out", path_str(&surface),
        "--surface-resolution", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(&results).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scenario,policy,T,d,seed,replicate,checkpoint_t,cum_regret"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[0] == "1" && r[1] == "abe" && r[4] == "42"));
    assert_eq!(rows.last().unwrap()[2..7], ["2000", "2", "42", "1", "2000"]);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results.meta.json")).unwrap()).unwrap();
    assert!(meta["rng"].as_str().unwrap().contains("ChaCha8"));
    assert!(meta["version"].as_str().unwrap().starts_with('v'));
    assert_eq!(meta["config"]["horizons"], serde_json::json!([1000, 2000]));
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);

    let surface = fs::read_to_string(&surface).unwrap();
    assert_eq!(surface.lines().next(), Some("x1,x2,p_opt,p_learned"));
    assert_eq!(surface.lines().count(), 17);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let results = dir.path().join("r.csv");
    fs::write(
        &config,
        format!(
            r#"{{"scenario": [5], "T": [1000], "seed": 3, "replications": 1, "out": "{}"}}"#,
            path_str(&results)
        ),
    )
    .unwrap();
    let out = abe(&["--config", path_str(&config), "--seed", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&results).unwrap();
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("5,static_ucb,1000,2,11,0,"), "{first}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"horizon": 1000}"#).unwrap();
    let out = abe(&["--config", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_names_the_path() {
    let out = abe(&["--T", "1000", "--replications", "1", "--out", "/nonexistent-dir/r.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/r.csv"));
}

#[test]
fn output_bytes_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = ["--scenario", "1", "--scenario", "6", "--T", "1000", "--T", "5000", "--replications", "3"];
    for (path, threads) in [(&a, "1"), (&b, "3")] {
        let mut args = common.to_vec();
        args.extend(["--threads", threads, "--out", path_str(path)]);
        assert!(abe(&args).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
