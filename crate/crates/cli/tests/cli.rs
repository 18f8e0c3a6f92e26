use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use slope::weights::bh_weights;
use tempfile::TempDir;

fn slope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slope")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn column(text: &str) -> Vec<f64> {
    text.lines().map(|l| l.trim().parse().unwrap()).collect()
}

fn identity_csv(p: usize) -> String {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn weights_bh_rows() {
    let out = slope(&["weights", "--q", "0.2", "--p", "4", "--sigma", "1", "--kind", "bh"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    let first: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 1.9600).abs() < 5e-5);
    assert!(rows[0].starts_with("1,"));
}

#[test]
fn weights_round_trip_exactly() {
    let out = slope(&["weights", "--q", "0.05", "--p", "50", "--sigma", "2.5"]);
    let parsed: Vec<f64> = stdout(&out).lines().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(parsed, bh_weights(0.05, 50, 2.5).unwrap().into_vec());
}

#[test]
fn weights_sqrtlog_single() {
    let out = slope(&["weights", "--kind", "sqrtlog", "--p", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    let v: f64 = text.trim().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn bad_flag_exits_2_naming_it() {
    let out = slope(&["weights", "--q", "1.5", "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--q"));
    let out = slope(&["weights", "--p", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--p"));
}

#[test]
fn prox_examples() {
    let dir = TempDir::new().unwrap();
    let y = write(&dir, "y.csv", "3.5\n-3\n");
    let lam = write(&dir, "lam.csv", "2\n1\n");
    let out = slope(&["prox", "--y", s(&y), "--lambda", s(&lam), "--check"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(column(&stdout(&out)), vec![1.75, -1.75]);

    // weights output is accepted as a lambda file
    let table = write(&dir, "w.csv", "1,2\n2,1\n");
    let out = slope(&["prox", "--y", s(&y), "--lambda", s(&table)]);
    assert_eq!(column(&stdout(&out)), vec![1.75, -1.75]);

    let row = write(&dir, "row.csv", "5,3\n");
    let out = slope(&["prox", "--y", s(&row), "--lambda", s(&lam)]);
    assert_eq!(column(&stdout(&out)), vec![3.0, 2.0]);
}

#[test]
fn prox_rejects_bad_lambda() {
    let dir = TempDir::new().unwrap();
    let y = write(&dir, "y.csv", "1\n2\n");
    let lam = write(&dir, "lam.csv", "1\n2\n");
    let out = slope(&["prox", "--y", s(&y), "--lambda", s(&lam)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_identity_matches_prox() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", &identity_csv(5));
    let y = write(&dir, "y.csv", "4\n-1.5\n0.3\n2.8\n-3.9\n");
    let beta_path = dir.path().join("beta_hat.csv");
    let out = slope(&["fit", "--x", s(&x), "--y", s(&y), "--method", "slope", "--q", "0.2", "--out", s(&beta_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fitted = column(&std::fs::read_to_string(&beta_path).unwrap());

    let prox = slope(&["prox", "--y", s(&y), "--q", "0.2"]);
    let expected = column(&stdout(&prox));
    let dist: f64 = fitted.iter().zip(&expected).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(dist <= 1e-8, "{dist}");

    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("beta_hat.json")).unwrap()).unwrap();
    for key in ["duality_gap", "iterations", "objective", "support_size", "converged"] {
        assert!(side.get(key).is_some(), "{key}");
    }
    assert_eq!(side["converged"], true);
    let support = expected.iter().filter(|v| **v != 0.0).count() as u64;
    assert_eq!(side["support_size"].as_u64(), Some(support));
}

#[test]
fn fit_lasso_soft_thresholds() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", &identity_csv(3));
    let y = write(&dir, "y.csv", "3\n-0.5\n-2\n");
    let beta_path = dir.path().join("b.csv");
    let out =
        slope(&["fit", "--x", s(&x), "--y", s(&y), "--method", "lasso", "--lambda", "1", "--out", s(&beta_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fitted = column(&std::fs::read_to_string(&beta_path).unwrap());
    for (f, e) in fitted.iter().zip([2.0, 0.0, -1.0]) {
        assert!((f - e).abs() < 1e-8);
    }
}

#[test]
fn fit_closed_form_methods() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", &identity_csv(4));
    let y = write(&dir, "y.csv", "4\n1\n0.5\n0.2\n");
    let beta_path = dir.path().join("b.csv");
    let out = slope(&["fit", "--x", s(&x), "--y", s(&y), "--method", "fdr-hard", "--q", "0.2", "--out", s(&beta_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(column(&std::fs::read_to_string(&beta_path).unwrap()), vec![4.0, 0.0, 0.0, 0.0]);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(side["support_size"], 1);
    assert_eq!(side["threshold"], 4.0);

    for method in ["seq-fdr", "sure"] {
        let out = slope(&["fit", "--x", s(&x), "--y", s(&y), "--method", method, "--out", s(&beta_path)]);
        assert!(out.status.success(), "{method}: {}", stderr(&out));
    }
}

#[test]
fn malformed_csv_reports_line() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1,0\n0,abc\n");
    let y = write(&dir, "y.csv", "1\n2\n");
    let out = slope(&["fit", "--x", s(&x), "--y", s(&y), "--out", s(&dir.path().join("b.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let ragged = write(&dir, "r.csv", "1,0\n0,1\n1\n");
    let out = slope(&["fit", "--x", s(&ragged), "--y", s(&y), "--out", s(&dir.path().join("b.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn header_flag_skips_a_line() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "a,b\n1,0\n0,1\n");
    let y = write(&dir, "y.csv", "y\n5\n0.1\n");
    let beta_path = dir.path().join("b.csv");
    let out = slope(&[
        "fit", "--x", s(&x), "--y", s(&y), "--method", "lasso", "--lambda", "1", "--header", "--out", s(&beta_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let fitted = column(&std::fs::read_to_string(&beta_path).unwrap());
    assert!((fitted[0] - 4.0).abs() < 1e-8 && fitted[1] == 0.0);
}

#[test]
fn non_convergence_is_not_an_error() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.csv", "1,0.9,0.2\n0.3,1,0.8\n0.5,0.1,1\n0.7,0.4,0.6\n");
    let y = write(&dir, "y.csv", "9\n-4\n6\n2\n");
    let beta_path = dir.path().join("b.csv");
    let out = slope(&["fit", "--x", s(&x), "--y", s(&y), "--max-iter", "1", "--out", s(&beta_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(side["converged"], false);
}

const SMALL_CONFIG: &str = r#"{
  "n": 40, "p": 30, "k": 3, "sigma": 1.0, "q": 0.1, "epsilon": 0.1,
  "replicates": 6, "seed": 42,
  "methods": ["slope", "lasso", "fdr-hard", "seq-fdr", "sure"],
  "signal": {"amplitude": {"rule": "constant", "multiplier": 2.0}, "placement": "uniform-random",
             "random_signs": true},
  "histograms": true
}"#;

#[test]
fn simulate_is_thread_count_invariant() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL_CONFIG);
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    assert!(slope(&["simulate", "--config", s(&cfg), "--out-dir", s(&one), "--threads", "1"]).status.success());
    assert!(slope(&["simulate", "--config", s(&cfg), "--out-dir", s(&four), "--threads", "4"]).status.success());
    let a = std::fs::read(one.join("trials.csv")).unwrap();
    let b = std::fs::read(four.join("trials.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 6 * 5);
    for f in ["summary.json", "hist_fdp.dat", "hist_v.dat"] {
        assert!(one.join(f).exists(), "{f}");
    }

    // a different seed changes the draws
    let other = dir.path().join("other");
    slope(&["simulate", "--config", s(&cfg), "--out-dir", s(&other), "--seed", "43"]);
    assert_ne!(std::fs::read(one.join("trials.csv")).unwrap(), std::fs::read(other.join("trials.csv")).unwrap());
}

#[test]
fn simulate_null_counts_every_discovery_as_false() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", &SMALL_CONFIG.replace("\"k\": 3", "\"k\": 0"));
    let out_dir = dir.path().join("out");
    let out = slope(&["simulate", "--config", s(&cfg), "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    for m in summary["methods"].as_array().unwrap() {
        assert_eq!(m["v"]["mean"], m["r"]["mean"], "{}", m["method"]);
    }
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", &SMALL_CONFIG.replace("\"q\": 0.1", "\"q\": 2.0"));
    let out = slope(&["simulate", "--config", s(&bad), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let garbled = write(&dir, "garbled.json", "{\n  \"n\": 4,\n  oops\n}");
    let out = slope(&["simulate", "--config", s(&garbled), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg: slope::simulation::ExperimentConfig = serde_json::from_str(&text).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn selfcheck_passes() {
    let out = slope(&["selfcheck", "--instances", "100", "--max-p", "6"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}
