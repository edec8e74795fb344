use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rankql_cli::{ingest_csv, IngestError};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankql"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

const FIVE: &str = "x,y\n1,2\n2,1\n3,4\n4,3\n5,5\n";

#[test]
fn ingest_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ingest_csv(write(dir.path(), "ok.csv", "x,y\n1,2\n3,4\n")).unwrap();
    assert_eq!(ok.column_names, ["x", "y"]);
    assert_eq!(ok.columns, vec![vec![1.0, 3.0], vec![2.0, 4.0]]);

    match ingest_csv(write(dir.path(), "nan.csv", "x,y\n1,2\n3,NaN\n")) {
        Err(IngestError::ParseError { row, column, value }) => {
            assert_eq!((row, column.as_str(), value.as_str()), (3, "y", "NaN"));
        }
        other => panic!("{other:?}"),
    }
    match ingest_csv(write(dir.path(), "rag.csv", "x,y\n1,2\n3\n4,5\n")) {
        Err(IngestError::RaggedRows { row, .. }) => assert_eq!(row, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        ingest_csv(write(dir.path(), "empty.csv", "")),
        Err(IngestError::EmptyFile { .. })
    ));
    assert!(matches!(
        ingest_csv(write(dir.path(), "header.csv", "x,y\n")),
        Err(IngestError::EmptyFile { .. })
    ));
}

#[test]
fn corr_five_point_example() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.csv", FIVE);
    let out = run(&["corr", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let pair = &v["pairs"][0];
    assert_eq!(pair["rho_hat"].as_f64(), Some(0.8));
    assert_eq!(pair["dof"].as_u64(), Some(3));
    for key in ["t_stat", "p_value", "fisher_info", "lambda"] {
        assert!(pair.get(key).is_some(), "{key}");
    }
}

#[test]
fn corr_identical_and_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let same = write(dir.path(), "same.csv", "a,b\n3,3\n1,1\n2,2\n7,7\n");
    let v = json(&run(&["corr", same.to_str().unwrap()]));
    assert_eq!(v["pairs"][0]["rho_hat"].as_f64(), Some(1.0));

    let flat = write(dir.path(), "flat.csv", "a,b\n3,5\n1,5\n2,5\n7,5\n");
    let out = run(&["corr", flat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`b`"));
}

#[test]
fn fit_examples() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.csv", FIVE);
    let p = f.to_str().unwrap();

    let v = json(&run(&["fit", "--response", "y", "--predictors", "x", p]));
    assert!((v["beta"][0].as_f64().unwrap() - 0.8).abs() < 1e-12);

    let v = json(&run(&["fit", "--response", "y", "--predictors", "y", p]));
    assert!((v["beta"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = run(&["fit", "--response", "y", "--predictors", "zzz", p]);
    assert_eq!(out.status.code(), Some(2));

    let collinear = write(dir.path(), "c.csv", "y,a,b\n1,1,1\n2,2,2\n4,3,3\n3,4,4\n5,5,5\n");
    let out = run(&["fit", "--response", "y", "--predictors", "a,b", collinear.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}

#[test]
fn weighted_fit_on_homoscedastic_sample() {
    // With two bins of equal residual spread the weights are constant.
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "h.csv", "x,y\n1,2\n2,1\n3,3\n4,4\n5,6\n6,5\n7,7\n8,8\n");
    let p = f.to_str().unwrap();
    let plain = json(&run(&["fit", "--response", "y", "--predictors", "x", p]));
    let out = run(&["fit", "--response", "y", "--predictors", "x", "--weighted", "--bins", "2", p]);
    assert_eq!(out.status.code(), Some(0));
    let w = json(&out);
    let a = plain["beta"][0].as_f64().unwrap();
    let b = w["beta"][0].as_f64().unwrap();
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    assert_eq!(w["weights"].as_array().unwrap().len(), 8);
}

#[test]
fn iv_and_moments() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "iv.csv",
        "y,x,z\n1.0,0.3,0.1\n2.2,1.1,0.9\n0.4,0.2,-0.5\n3.1,2.0,1.2\n1.9,0.9,0.4\n-0.3,-1.0,-1.1\n2.8,1.7,1.5\n0.1,-0.2,-0.3\n",
    );
    let p = f.to_str().unwrap();
    let out = run(&["iv", "--response", "y", "--predictors", "x", "--instruments", "z", p]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["beta_2sls"][0].as_f64().unwrap().is_finite());
    assert!(v["first_stage_f"].as_f64().unwrap() > 0.0);

    let v = json(&run(&["moments", "--columns", "x,z", p]));
    assert_eq!(v["columns"].as_array().unwrap().len(), 2);
    assert!(v["columns"][0]["mu2"].as_f64().unwrap() > 0.0);
}

#[test]
fn tie_policy_flag() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.csv", "x,y\n1,1\n1,2\n2,2\n3,4\n4,3\n");
    let p = f.to_str().unwrap();
    let k = json(&run(&["corr", p]));
    let q = json(&run(&["corr", "--tie-policy", "paper", p]));
    assert_eq!(k["tie_policy"], "kemeny");
    assert_eq!(q["tie_policy"], "paper");
    assert_ne!(k["pairs"][0]["rho_hat"], q["pairs"][0]["rho_hat"]);
    assert_eq!(run(&["corr", "--tie-policy", "odd", p]).status.code(), Some(2));
}

#[test]
fn simulate_dispatch_and_exit_codes() {
    let out = run(&["simulate", "null-calibration", "--reps", "400", "--seed", "3"]);
    let v = json(&out);
    assert_eq!(v["experiment"], "null-calibration");
    assert_eq!(v["claim_checks"].as_array().unwrap().len(), 1);
    let pass = v["claim_checks"][0]["pass"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if pass { 0 } else { 1 }));

    assert_eq!(run(&["simulate", "no-such-thing"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "null-calibration", "--reps", "0"]).status.code(), Some(2));
}

#[test]
fn failing_claim_exits_one() {
    // 1000 replicates at N = 30 cannot hit a 1e-6 tolerance
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"reps": 1000, "thresholds": {"unbiasedness_tol": 1e-6}}"#);
    let out = run(&["simulate", "unbiasedness", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["claim_checks"][0]["pass"], false);
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let csv = dir.path().join("a.csv");
    for out in [&a, &b] {
        let status = run(&[
            "simulate",
            "breakdown",
            "--reps",
            "60",
            "--n",
            "40",
            "--seed",
            "17",
            "--replicates",
            "--dump-csv",
            csv.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .status;
        assert!(status.code() == Some(0) || status.code() == Some(1));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(fs::read_to_string(csv).unwrap().starts_with("replicate,rank shift eps=0.1"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"reps": 120, "seed": 5, "n": 15}"#);
    let c = cfg.to_str().unwrap();
    let v = json(&run(&["simulate", "null-calibration", "--config", c]));
    assert_eq!(v["replicates"], 120);
    assert_eq!(v["config"]["generator"]["n"], 15);
    let v = json(&run(&["simulate", "null-calibration", "--config", c, "--reps", "130"]));
    assert_eq!(v["replicates"], 130);

    let bad = write(dir.path(), "bad.json", r#"{"nonsense": 1}"#);
    assert_eq!(run(&["simulate", "null-calibration", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}
