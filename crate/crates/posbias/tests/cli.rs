use std::path::Path;
use std::process::{Command, Output};

use posbias::formats::load_estimate;

fn posbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posbias"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("sim.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "num_queries = 200\nsweeps = 4\nseed = 5\n";

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let logs = dir.path().join("logs.jsonl");
    let corpus = dir.path().join("corpus.jsonl");
    let out = posbias(&[
        "simulate",
        "--config",
        &config,
        "--out-logs",
        logs.to_str().unwrap(),
        "--out-corpus",
        corpus.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for method in ["mle", "pairwise"] {
        let est = dir.path().join(format!("{method}.json"));
        let out = posbias(&[
            "estimate",
            "--logs",
            logs.to_str().unwrap(),
            "--top-k",
            "5",
            "--method",
            method,
            "--out",
            est.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let file = load_estimate(&est).unwrap();
        assert_eq!(file.method, method);
        assert_eq!(file.rel_propensity.len(), 5);
        assert_eq!(file.rel_propensity[0], Some(1.0));
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |seed: &str, name: &str| {
        let logs = dir.path().join(name);
        let corpus = dir.path().join(format!("{name}.corpus"));
        let out = posbias(&[
            "simulate",
            "--config",
            &config,
            "--out-logs",
            logs.to_str().unwrap(),
            "--out-corpus",
            corpus.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(out.status.success());
        std::fs::read(logs).unwrap()
    };
    assert_eq!(run("9", "a"), run("9", "b"));
    assert_ne!(run("9", "c"), run("10", "d"));
}

#[test]
fn experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "num_queries = 100\n");
    let out_path = dir.path().join("rows.csv");
    let out = posbias(&[
        "experiment",
        "overlap",
        "--config",
        &config,
        "--values",
        "0.5,1.0",
        "--runs",
        "2",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,mse_mean,mse_variance,runs,unidentifiable_runs");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2], "1,nan,nan,2,2");
}

#[test]
fn truth_prints_propensities() {
    let out = posbias(&["truth", "--eta", "1", "--top-k", "4"]);
    assert!(out.status.success());
    let v: Vec<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "eta = 1.0\nbogus_key = 3\n");
    let out = posbias(&[
        "simulate",
        "--config",
        &bad,
        "--out-logs",
        "/dev/null",
        "--out-corpus",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let logs = dir.path().join("bad.jsonl");
    std::fs::write(
        &logs,
        "{\"format\":\"clicklog\",\"version\":1}\n{\"ranker_id\":\"A\",\"query_id\":\"q\",\"ranking\":[\"a\",\"b\"],\"clicks\":[1]}\n",
    )
    .unwrap();
    let out = posbias(&["estimate", "--logs", logs.to_str().unwrap(), "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));

    let out = posbias(&["estimate", "--logs", "/nonexistent/logs.jsonl", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(1));
}
