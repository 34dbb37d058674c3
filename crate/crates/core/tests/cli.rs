use std::path::Path;
use std::process::{Command, Output};

fn preflearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preflearn"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("detail.jsonl");
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"mode":"active_noise_free","m":4,"eps":0.05,"noise":{{"kind":"zero"}},"trials":7,"master_seed":3,"n_mc":200,"jsonl":{:?}}}"#,
            jsonl.to_str().unwrap()
        ),
    );
    let out = preflearn(&["run", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial_index,seed,n_or_queries,e1_estimate,e1_stderr,e2,seminorm_e2,lambda_min,wall_seconds,success_flag"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    for (i, row) in rows.iter().enumerate() {
        assert!(row.starts_with(&format!("{i},")));
        assert!(row.ends_with(",true"));
    }
    let detail = std::fs::read_to_string(jsonl).unwrap();
    assert_eq!(detail.lines().count(), 7);
    assert!(detail.contains("\"w_hat\""));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_n = write(
        dir.path(),
        "a.json",
        r#"{"mode":"passive_mle","m":3,"n":0,"noise":{"kind":"logistic"},"trials":1,"master_seed":1}"#,
    );
    assert_eq!(
        preflearn(&["run", "--config", &bad_n]).status.code(),
        Some(2)
    );
    let unknown = write(
        dir.path(),
        "b.json",
        r#"{"mode":"passive_mle","m":3,"bogus":1}"#,
    );
    assert_eq!(
        preflearn(&["run", "--config", &unknown]).status.code(),
        Some(2)
    );
    let no_grid = write(
        dir.path(),
        "c.json",
        r#"{"mode":"active_noise_free","m":3,"eps":0.1,"noise":{"kind":"zero"},"trials":1,"master_seed":1}"#,
    );
    assert_eq!(
        preflearn(&["sweep", "--config", &no_grid]).status.code(),
        Some(2)
    );
    assert_eq!(
        preflearn(&["demo", "--which", "thm9"]).status.code(),
        Some(2)
    );
}

#[test]
fn learner_aborts_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "flat.csv", "z,F\n-1000000,0\n1000000,1\n");
    let cfg = write(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"mode":"active_noisy","m":3,"eps":0.05,"delta":0.1,"noise":{{"kind":"tabulated","path":{table:?}}},"trials":2,"master_seed":1}}"#
        ),
    );
    let out = preflearn(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.ends_with(",false") && l.contains("NaN")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("aborted"));
}

#[test]
fn sweep_writes_summary_next_to_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"mode":"active_noise_free","m":3,"noise":{"kind":"zero"},"trials":3,"master_seed":1,"n_mc":10,"sweep":{"eps":[0.1,0.01]}}"#,
    );
    let out_path = dir.path().join("s.csv");
    let out = preflearn(&[
        "sweep",
        "--config",
        &cfg,
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = std::fs::read_to_string(&out_path).unwrap();
    assert!(rows.starts_with("grid_value,trial_index,"));
    assert_eq!(rows.lines().count(), 7);
    let summary = std::fs::read_to_string(dir.path().join("s.csv.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.contains("n_or_queries"));
}

#[test]
fn verify_noise_prints_slack_table() {
    for model in ["logistic", "gaussian"] {
        let out = preflearn(&["verify-noise", "--model", model]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("x,inverse,bound,slack"));
        let table_rows = text
            .lines()
            .skip_while(|l| !l.starts_with("x,"))
            .skip(1)
            .count();
        assert_eq!(table_rows, 100);
    }
}

#[test]
fn thm6_demo_prints_json() {
    let out = preflearn(&["demo", "--which", "thm6"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outputs_identical"], serde_json::Value::Bool(true));
    assert!(v["max_e2"].as_f64().unwrap() >= 2f64.sqrt() / 2.0 - 1e-12);
}
