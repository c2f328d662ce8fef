use std::process::Command;

use dysonprop_cli::Report;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dysonprop"))
}

#[test]
fn free_model_gives_zero_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("free.json");
    std::fs::write(&model, r#"{"dim":3,"energies":[-1,0.5,2],"h1":[[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]]]}"#)
        .unwrap();
    let out = dir.path().join("report.json");
    let status = bin()
        .args(["propagate", "--model", model.to_str().unwrap(), "--t", "1.3", "--order", "3"])
        .args(["--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!report.rows.is_empty());
    assert!(report.rows.iter().all(|r| r.abs_error == 0.0), "free model must reproduce the free propagator");
    assert!(report.passed());
}

#[test]
fn csv_output_has_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let status = bin()
        .args(["dyson-check", "--dim", "3", "--order", "40", "--format", "csv", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "order,row,col,computed_re,computed_im,oracle_re,oracle_im,abs_error,rel_error"
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|l| l.split(',').count() == 9));
}

#[test]
fn failing_criterion_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = bin()
        .args(["dyson-check", "--dim", "3", "--order", "5", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!report.passed());
}

#[test]
fn usage_and_input_errors_are_reported() {
    let bad_arg = bin().args(["propagate", "--order", "-1"]).output().unwrap();
    assert_eq!(bad_arg.status.code(), Some(2));
    let missing = bin().args(["propagate", "--model", "/nonexistent/model.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let run = || bin().args(["propagate", "--dim", "2", "--seed", "5", "--order", "2"]).output().unwrap().stdout;
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}
