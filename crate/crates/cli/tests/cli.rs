use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use thinfilm::io::{write_grid_csv, write_quantile_csv};
use thinfilm::jko::{TrajectoryDir, CONFIG_FILE, RECORDS_FILE};
use thinfilm::{GridDensity, SmythHill};

fn thinfilm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinfilm")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", path(dir)];
    args.extend_from_slice(extra);
    thinfilm(&args)
}

fn stored(dir: &Path) -> TrajectoryDir {
    serde_json::from_str(&fs::read_to_string(dir.join(CONFIG_FILE)).unwrap()).unwrap()
}

#[test]
fn zero_final_time_writes_the_initial_record_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = simulate(&dir, &["--t-final", "0", "--cells", "50"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let records = fs::read_to_string(dir.join(RECORDS_FILE)).unwrap();
    assert_eq!(records.lines().count(), 2);
}

#[test]
fn repeated_runs_give_identical_records() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--ic", "smyth-translated:0.3", "--tau", "1e-3", "--cells", "100", "--t-final", "0.1"];
    for name in ["a", "b"] {
        let out = simulate(&tmp.path().join(name), &args);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = fs::read(tmp.path().join("a").join(RECORDS_FILE)).unwrap();
    let b = fs::read(tmp.path().join("b").join(RECORDS_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_overrides_flags_which_override_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"tau": 5e-3, "t_final": 0.01}"#).unwrap();
    let dir = tmp.path().join("run");
    let out = simulate(&dir, &["--config", path(&cfg), "--tau", "2e-3", "--cells", "60", "--t-final", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run = stored(&dir).run;
    assert_eq!(run.tau, 5e-3);
    assert_eq!(run.t_final, 0.01);
    assert_eq!(run.n_cells, 60);
    assert_eq!(run.mass, 2.0 / 45.0);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"taux": 5e-3}"#).unwrap();
    let out = simulate(&tmp.path().join("run"), &["--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("taux"));
}

#[test]
fn invalid_values_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(&tmp.path().join("run"), &["--tau=-1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = simulate(&tmp.path().join("run"), &["--ic", "spiral:1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = thinfilm(&["check", path(tmp.path()), "--suite", "weekly"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn equilibrium_run_passes_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("eq");
    let out = simulate(&dir, &["--ic", "smyth-translated:0", "--cells", "200", "--t-final", "0.2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = thinfilm(&["check", path(&dir), "--suite", "all", "--count", "10"]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("check.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert!(report["reports"].as_array().unwrap().len() > 100);
}

#[test]
fn doctored_snapshot_fails_loudly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert!(simulate(&dir, &["--cells", "50", "--t-final", "0.005"]).status.success());
    let snap = dir.join("snapshots").join("000003.csv");
    let text = fs::read_to_string(&snap).unwrap();
    let mut lines = text.lines();
    let mut doctored = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let (s, x) = line.split_once(',').unwrap();
        doctored.push_str(&format!("{s},{}\n", -x.parse::<f64>().unwrap()));
    }
    fs::write(&snap, doctored).unwrap();
    let out = thinfilm(&["check", path(&dir), "--suite", "dynamic"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("000003.csv"), "{}", stderr(&out));
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let base = ["--tau", "1e-3", "--cells", "80"];
    assert!(simulate(&a, &[&base[..], &["--t-final", "0.06"]].concat()).status.success());
    assert!(simulate(&b, &[&base[..], &["--t-final", "0.03"]].concat()).status.success());
    let out = thinfilm(&["resume", path(&b), "--t-final", "0.06"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read(a.join(RECORDS_FILE)).unwrap(), fs::read(b.join(RECORDS_FILE)).unwrap());
    assert_eq!(stored(&b).run.t_final, 0.06);
}

#[test]
fn rates_writes_json_csv_and_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let args = ["--ic", "smyth-translated:0.5", "--tau", "2e-3", "--cells", "100", "--t-final", "1.5", "--p", "1.5,1.25"];
    assert!(simulate(&dir, &args).status.success());
    let missing = thinfilm(&["rates", path(&dir), "--p", "1.75"]);
    assert_eq!(missing.status.code(), Some(2));
    let out = thinfilm(&["rates", path(&dir), "--p", "1.5,1.25"]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let csv = fs::read_to_string(dir.join("rates.csv")).unwrap();
    assert!(csv.starts_with("quantity,window,rate,target,slack,pass"));
    assert!(csv.contains("normp1_sq(1.25)"));
    let plot = fs::read_to_string(dir.join("rates_plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 752);
    assert!(dir.join("rates.json").exists());
}

#[test]
fn w2_of_identical_and_translated_files() {
    let tmp = tempfile::tempdir().unwrap();
    let sh = SmythHill::new(2.0 / 45.0).unwrap();
    let q = sh.quantiles(2000).unwrap();
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    write_quantile_csv(&a, &q).unwrap();
    write_quantile_csv(&b, &q.translated(0.25).unwrap()).unwrap();
    let same = thinfilm(&["w2", path(&a), path(&a)]);
    assert_eq!(stdout(&same).trim().parse::<f64>().unwrap(), 0.0);
    let moved = thinfilm(&["w2", path(&a), path(&b)]);
    let d: f64 = stdout(&moved).trim().parse().unwrap();
    assert!((d - 0.25 * sh.mass().sqrt()).abs() < 1e-12, "{d}");

    let grid = tmp.path().join("g.csv");
    write_grid_csv(&grid, &GridDensity::from_fn(-1.2, 1e-4, 24_001, |x| sh.value(x)).unwrap()).unwrap();
    let mixed = thinfilm(&["w2", path(&grid), path(&a)]);
    let d: f64 = stdout(&mixed).trim().parse().unwrap();
    assert!(d < 1e-4, "{d}");
}

#[test]
fn w2_rejects_unequal_masses() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    write_quantile_csv(&a, &SmythHill::new(1.0).unwrap().quantiles(50).unwrap()).unwrap();
    write_quantile_csv(&b, &SmythHill::new(2.0).unwrap().quantiles(50).unwrap()).unwrap();
    assert_eq!(thinfilm(&["w2", path(&a), path(&b)]).status.code(), Some(1));
}

#[test]
fn crossval_short_horizon_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("cv");
    let out = thinfilm(&["crossval", "--t-final", "2e-3", "--grid-points", "161", "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("crossval.json")).unwrap()).unwrap();
    assert!(report["l1_gap"].as_f64().unwrap() < 1e-2);
    assert!(out_dir.join("fdm_final.csv").exists() && out_dir.join("jko_final.csv").exists());
}

#[test]
fn crossval_positivity_loss_is_a_domain_failure() {
    let out = thinfilm(&["crossval", "--t-final", "0.05", "--grid-points", "321", "--half-width", "6"]);
    assert_eq!(out.status.code(), Some(1), "{}{}", stdout(&out), stderr(&out));
    assert!(stderr(&out).contains("positivity"), "{}", stderr(&out));
}
