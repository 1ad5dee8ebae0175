use std::path::Path;
use std::process::{Command, Output};

use fockspec::friedrichs::{DeltaEvaluator, EssentialSpectrumReport};
use fockspec::grid::make_grid;
use fockspec::model::{builtin, Family};

fn fockspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockspec")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn ess_json_round_trips_against_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ess.json");
    let o = fockspec(&["ess", "--grid-n", "32", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let read: EssentialSpectrumReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let model = builtin(&Family::Exact { a: 1.0, b: 1.0, w0: 0.0 }).unwrap();
    let direct = DeltaEvaluator::new(model, make_grid(32).unwrap()).essential_spectrum().unwrap();
    assert_eq!(read, direct);
    assert_eq!(read.band, [0.0, 2.0]);
    assert_eq!(read.sigma_intervals.len(), 2);
    assert!(read.sigma_intervals.iter().all(|iv| iv[0] == iv[1]));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv"].iter().map(|f| dir.path().join(f)).collect();
    for p in &paths {
        let o = fockspec(&["count", "--grid-n", "24", "--format", "csv", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn count_column_is_nondecreasing() {
    let o = fockspec(&["count", "--grid-n", "32", "--format", "csv", "--z", "-3", "--z", "-1.5", "--z", "-1.0", "--z", "-0.95"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# fockspec-report-v1\n"));
    let counts: Vec<usize> = csv_rows(&text).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(counts.len(), 4);
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
}

#[test]
fn thresholds_case1_reports_critical_coupling() {
    let o = fockspec(&["thresholds", "--case", "1", "--l", "2", "--grids", "16,20", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let mu0 = v["mu_critical"].as_f64().unwrap();
    assert!((mu0 - 3.0 / std::f64::consts::PI).abs() < 1e-15);
    assert_eq!(v["lambda_limit"].as_f64().unwrap(), 9.0);
    assert_eq!(v["growth"]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# subcritical case 2\nmodel = case2\nmu = 0.9/pi\ngrid_n = 32\nformat = csv\n").unwrap();
    let o = fockspec(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("classification,CaseIII_nonneg_min"));
    let o = fockspec(&["classify", "--config", cfg.to_str().unwrap(), "--param", "mu=1.2/pi"]);
    assert!(stdout(&o).contains("classification,CaseII_negative_min"));
}

#[test]
fn app_json_has_report_keys() {
    let o = fockspec(&["app", "--grid-n", "16", "--param", "alpha=1.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["alpha", "alpha0", "e_min_plus", "e_min_minus", "e_min", "ess_intervals", "counts_plus", "counts_minus", "flags"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["e_min"].as_f64().unwrap() < -1.0);
}

#[test]
fn tolerance_overrides() {
    assert!(fockspec(&["ess", "--grid-n", "16", "--tol", "sign_tol=1e-8", "--tol", "adaptive_tol=0.5"]).status.success());
    assert_eq!(fockspec(&["ess", "--grid-n", "16", "--tol", "bogus=1"]).status.code(), Some(2));
    assert_eq!(fockspec(&["ess", "--grid-n", "16", "--tol", "eig_tol=-1"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(fockspec(&["ess", "--grid-n", "8"]).status.code(), Some(2));
    assert_eq!(fockspec(&["ess", "--model", "nope"]).status.code(), Some(2));
    assert_eq!(fockspec(&["ess", "--grid-n", "16", "--param", "zz=1"]).status.code(), Some(2));
    let o = fockspec(&["count", "--grid-n", "16", "--z", "0.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain"));
    assert_eq!(fockspec(&["oracle", "--grid-n", "200"]).status.code(), Some(4));
    assert_eq!(fockspec(&["exact", "--model", "case2"]).status.code(), Some(2));
}

#[test]
fn help_documents_csv_columns() {
    let o = fockspec(&["count", "--help"]);
    assert!(stdout(&o).contains("CSV columns: z, count, borderline, top_eigenvalue"));
}

#[test]
fn output_goes_to_file_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let o = fockspec(&["oracle", "--grid-n", "16", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(Path::new(&out).exists());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("value,multiplicity,spread"));
}
