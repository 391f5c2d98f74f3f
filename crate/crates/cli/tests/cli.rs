use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmd_core::rng::stream_rng;
use mmd_core::sim::SampleDistribution;
use serde_json::Value;
use tempfile::TempDir;

fn mmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmd"))
        .args(args)
        .env_remove("MMD_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn write_normal(dir: &TempDir, name: &str, n: usize, mean: f64, seed: u64) -> PathBuf {
    let m = SampleDistribution::normal(mean, 1.0)
        .sample(n, &mut stream_rng(seed, &[]))
        .unwrap();
    let text: String = m.as_slice().iter().map(|v| format!("{v}\n")).collect();
    write(dir, name, &text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identical_files_do_not_reject() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 40, 0.0, 1);
    let v = json(&mmd(&["test", s(&x), s(&x), "--permutations", "199"]));
    assert_eq!(v["command"], "test");
    assert_eq!(v["result"]["reject"], false);
    assert_eq!(v["result"]["num_permutations"], 199);
}

#[test]
fn separated_samples_reject() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 200, 0.0, 1);
    let y = write_normal(&dir, "y.csv", 200, 5.0, 2);
    let v = json(&mmd(&["test", s(&x), s(&y), "--kernel", "gaussian", "--lengthscale", "1"]));
    assert_eq!(v["result"]["reject"], true);
    assert!(v["result"]["p_value"].as_f64().unwrap() <= 1.0 / 201.0 + 1e-12);
}

#[test]
fn very_unequal_sizes_are_accepted() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 1031, 0.0, 1);
    let y = write_normal(&dir, "y.csv", 10_000, 0.0, 2);
    let v = json(&mmd(&["test", s(&x), s(&y), "--permutations", "19"]));
    assert_eq!(v["result"]["n_x"], 1031);
    assert_eq!(v["result"]["n_y"], 10_000);
}

#[test]
fn malformed_csv_reports_line_and_exit_code() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1.0\n2.0\nabc\n");
    let y = write(&dir, "y.csv", "1.0\n2.0\n");
    let out = mmd(&["test", s(&x), s(&y)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn width_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1,2\n3,4\n5,6\n");
    let y = write(&dir, "y.csv", "1\n2\n3\n");
    let out = mmd(&["test", s(&x), s(&y)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("columns"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mmd(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(mmd(&["power-sim", "--reps", "0"]).status.code(), Some(1));
    assert_eq!(mmd(&["test", "a.csv", "b.csv", "--alpha", "1.5"]).status.code(), Some(1));
    assert_eq!(mmd(&["null-dist", "--reps", "0"]).status.code(), Some(1));
    assert_eq!(mmd(&["--help"]).status.code(), Some(0));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 60, 0.0, 1);
    let y = write_normal(&dir, "y.csv", 25, 0.4, 2);
    let run = |threads: &str| mmd(&["test", s(&x), s(&y), "--seed", "5", "--threads", threads]).stdout;
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
    let other = mmd(&["test", s(&x), s(&y), "--seed", "6"]).stdout;
    let (va, vo): (Value, Value) = (serde_json::from_slice(&a).unwrap(), serde_json::from_slice(&other).unwrap());
    assert_eq!(va["seed"], 5);
    assert_ne!(va["config_hash"], vo["config_hash"]);
}

#[test]
fn environment_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 20, 0.0, 1);
    let out = Command::new(env!("CARGO_BIN_EXE_mmd"))
        .args(["test", s(&x), s(&x)])
        .env("MMD_SEED", "42")
        .env("MMD_PERMUTATIONS", "9")
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["result"]["num_permutations"], 9);
}

#[test]
fn power_sim_csv_curve() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("curve.csv");
    let out = mmd(&[
        "power-sim", "--mode", "null", "--n-x", "10,20", "--n-y", "8", "--reps", "30",
        "--permutations", "19", "--format", "csv", "--out", s(&out_path), "--seed", "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# command=power-sim") && lines[0].contains("seed=3"));
    assert_eq!(lines[1], "n_x,n_y,rate,stderr");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("10,8,"));
}

#[test]
fn null_dist_writes_histograms_and_qq_pairs() {
    let dir = TempDir::new().unwrap();
    let qq = dir.path().join("qq.csv");
    for mode in ["null", "alternative"] {
        let v = json(&mmd(&[
            "null-dist", "--mode", mode, "--n-x", "36,100", "--reps", "60", "--reference-size", "150",
            "--limit-draws", "2000", "--bins", "5", "--qq-points", "9", "--qq", s(&qq),
        ]));
        let sizes = v["result"]["sizes"].as_array().unwrap();
        assert_eq!(sizes.len(), 2);
        assert_eq!(sizes[0]["n_y"], 30);
        let hist = sizes[1]["min_scaled"]["histogram"].as_array().unwrap();
        assert_eq!(hist.iter().map(|b| b["count"].as_u64().unwrap()).sum::<u64>(), 60);
        assert_eq!(sizes[1]["qq"].as_array().unwrap().len(), 9);
        let qq_text = std::fs::read_to_string(&qq).unwrap();
        assert_eq!(qq_text.lines().nth(1), Some("n_x,n_y,empirical,theoretical"));
        assert_eq!(qq_text.lines().count(), 2 + 18);
    }
}

#[test]
fn oracle_check_passes_and_detects_perturbation() {
    let v = json(&mmd(&["oracle-check", "--instances", "60"]));
    assert_eq!(v["result"]["passed"], true);
    let v = json(&mmd(&["oracle-check", "--instances", "60", "--seed", "9"]));
    assert_eq!(v["result"]["passed"], true);
    let out = mmd(&["oracle-check", "--instances", "60", "--perturb", "1.000001"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["passed"], false);
}

#[test]
fn tune_keeps_splits_disjoint_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 60, 0.0, 1);
    let y = write_normal(&dir, "y.csv", 40, 1.0, 2);
    let split_dir = dir.path().join("split");
    let v = json(&mmd(&["tune", s(&x), s(&y), "--split-dir", s(&split_dir), "--permutations", "49"]));
    let r = &v["result"]["tune"];
    let train: Vec<u64> = r["train_x"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap()).collect();
    let test: Vec<u64> = r["test_x"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap()).collect();
    assert_eq!(train.len() + test.len(), 60);
    assert!(train.iter().all(|i| !test.contains(i)));
    assert_eq!(v["result"]["held_out"]["n_x"], 30);
    assert_eq!(v["result"]["held_out"]["n_y"], 20);
    assert!(r["best_spec"]["params"]["lengthscale"].as_f64().unwrap() > 0.0);

    let original = std::fs::read_to_string(&x).unwrap();
    let rows: Vec<&str> = original.lines().collect();
    let held_out = std::fs::read_to_string(split_dir.join("test_x.csv")).unwrap();
    let expected: Vec<&str> = test.iter().map(|i| rows[*i as usize]).collect();
    assert_eq!(held_out.lines().collect::<Vec<_>>(), expected);

    // The held-out files feed straight back into `test`.
    let again = json(&mmd(&[
        "test",
        s(&split_dir.join("test_x.csv")),
        s(&split_dir.join("test_y.csv")),
    ]));
    assert_eq!(again["result"]["n_x"], 30);
}

#[test]
fn variance_exact_matches_enumeration() {
    let dir = TempDir::new().unwrap();
    let dists = write(
        &dir,
        "d.json",
        r#"{"p": {"support": [[0.0], [1.0], [2.5]], "probs": [0.2, 0.5, 0.3]},
            "q": {"support": [[0.5], [1.5]], "probs": [0.6, 0.4]}}"#,
    );
    let v = json(&mmd(&["variance", "--dists", s(&dists), "--n-x", "3", "--n-y", "2", "--enumerate"]));
    let r = &v["result"];
    let total = r["report"]["total"].as_f64().unwrap();
    let enumerated = r["enumerated_variance"].as_f64().unwrap();
    assert!((total - enumerated).abs() <= 1e-10 * enumerated);
    assert_eq!(r["ustat_variance"], Value::Null);
}

#[test]
fn variance_plugin_csv() {
    let dir = TempDir::new().unwrap();
    let x = write_normal(&dir, "x.csv", 50, 0.0, 1);
    let y = write_normal(&dir, "y.csv", 30, 1.0, 2);
    let out = mmd(&["variance", "--x", s(&x), "--y", s(&y), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("sigma_hat,")));
    assert_eq!(mmd(&["variance"]).status.code(), Some(1));
}
