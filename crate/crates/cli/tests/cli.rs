use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use upcr::{generate, predict, FittedEnsemble, Signal, SyntheticEnsembleSpec};
use upcr_cli::io::{read_labels, read_predictions, write_labels, write_predictions};

fn upcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upcr"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Writes a synthetic ensemble and returns (predictions, labels) paths.
fn dataset(dir: &TempDir, spec: &SyntheticEnsembleSpec) -> (PathBuf, PathBuf) {
    let data = generate(spec).unwrap();
    let preds = dir.path().join("predictions.csv");
    let labels = dir.path().join("labels.csv");
    write_predictions(fs::File::create(&preds).unwrap(), &data.predictions).unwrap();
    write_labels(
        fs::File::create(&labels).unwrap(),
        data.predictions.sample_ids(),
        &data.labels,
    )
    .unwrap();
    (preds, labels)
}

fn tractable_spec(seed: u64) -> SyntheticEnsembleSpec {
    let mut s =
        SyntheticEnsembleSpec::new(6, 2000, Signal::Normal { g2: 0.7, mean: 1.0 }, 0.15, seed);
    s.a_values = vec![0.3, -0.3, 0.2, -0.2, 0.1, -0.1];
    s.h_variances = vec![1.0, 1.5, 2.0, 1.0, 1.5, 2.0];
    s.noise_var = Some(0.3);
    s
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_csv_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "bad.csv", "sample_id,a,b,c\ns0,1,2,3\ns1,1,oops,3\n");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&path),
        "--mean-y",
        "0",
        "--var-y",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(
        msg.contains("line 3") && msg.contains("column 3") && msg.contains("`b`"),
        "{msg}"
    );
}

#[test]
fn non_finite_value_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "nan.csv", "sample_id,a,b,c\ns0,1,2,3\ns1,1,NaN,3\n");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&path),
        "--mean-y",
        "0",
        "--var-y",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("not finite"));
}

#[test]
fn too_few_regressors() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "two.csv", "sample_id,a,b\ns0,1,2\ns1,2,1\ns2,0,0\n");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&path),
        "--mean-y",
        "0",
        "--var-y",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("at least 3"), "{}", stderr(&out));
}

#[test]
fn moments_are_required() {
    let dir = TempDir::new().unwrap();
    let (preds, _) = dataset(&dir, &tractable_spec(1));
    let out = upcr(&["estimate", "--predictions", p(&preds), "--var-y", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn hard_input_exits_3_without_weights() {
    let dir = TempDir::new().unwrap();
    let mut spec = SyntheticEnsembleSpec::new(
        6,
        3000,
        Signal::Normal {
            g2: 0.02,
            mean: 0.0,
        },
        0.2,
        3,
    );
    spec.noise_var = Some(0.98);
    let (preds, _) = dataset(&dir, &spec);
    let report = dir.path().join("report.json");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--mean-y",
        "0",
        "--var-y",
        "1",
        "--output",
        p(&report),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let r = read_json(&report);
    assert_eq!(r["verdict"], "hard");
    assert!(r["model"]["weights"].is_null());
    assert!(r["regressors"]
        .as_array()
        .unwrap()
        .iter()
        .all(|x| x["weight"].is_null()));
    // Predicting with a hard model is refused.
    let out = upcr(&["predict", "--model", p(&report), "--predictions", p(&preds)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn identical_experts_get_uniform_weights() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticEnsembleSpec::new(4, 500, Signal::Normal { g2: 0.6, mean: 0.0 }, 0.0, 2);
    let (preds, _) = dataset(&dir, &spec);
    let report = dir.path().join("r.json");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--mean-y",
        "0",
        "--var-y",
        "1",
        "--output",
        p(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for r in read_json(&report)["regressors"].as_array().unwrap() {
        assert!((r["weight"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    }
}

#[test]
fn grid_points_flag_sets_curve_samples() {
    let dir = TempDir::new().unwrap();
    let (preds, _) = dataset(&dir, &tractable_spec(4));
    let report = dir.path().join("r.json");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--mean-y",
        "1",
        "--var-y",
        "2",
        "--grid-points",
        "3",
        "--output",
        p(&report),
    ]);
    assert!(code(&out) == 0 || code(&out) == 3);
    let qs: Vec<f64> = read_json(&report)["residual_curve"]
        .as_array()
        .unwrap()
        .iter()
        .map(|pt| pt["q"].as_f64().unwrap())
        .collect();
    assert_eq!(qs, vec![0.0, 1.0, 2.0]);
}

#[test]
fn config_file_supplies_settings() {
    let dir = TempDir::new().unwrap();
    let (preds, _) = dataset(&dir, &tractable_spec(5));
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"mean_y": 1.0, "var_y": 1.0, "grid_points": 5, "loss": "absolute"}"#,
    );
    let report = dir.path().join("r.json");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--config",
        p(&cfg),
        "--output",
        p(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(&report);
    assert_eq!(r["loss"], "absolute");
    assert_eq!(r["residual_curve"].as_array().unwrap().len(), 5);
    // Flags override the file.
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--config",
        p(&cfg),
        "--grid-points",
        "7",
        "--output",
        p(&report),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        read_json(&report)["residual_curve"]
            .as_array()
            .unwrap()
            .len(),
        7
    );
}

#[test]
fn estimate_then_predict_matches_in_process_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let (preds_path, _) = dataset(&dir, &tractable_spec(6));
    let report = dir.path().join("r.json");
    let model = dir.path().join("m.json");
    let fitted = dir.path().join("yhat.csv");
    let out = upcr(&[
        "estimate",
        "--predictions",
        p(&preds_path),
        "--mean-y",
        "1",
        "--var-y",
        "1",
        "--output",
        p(&report),
        "--model",
        p(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let preds = read_predictions(&preds_path).unwrap();
    let fit: FittedEnsemble = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let want = predict(&fit, &preds).unwrap();
    for model_file in [&report, &model] {
        let out = upcr(&[
            "predict",
            "--model",
            p(model_file),
            "--predictions",
            p(&preds_path),
            "--output",
            p(&fitted),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = fs::read_to_string(&fitted).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("sample_id,y_hat"));
        let got: Vec<f64> = lines
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(got, want);
    }
    // Deterministic reruns.
    let again = dir.path().join("r2.json");
    upcr(&[
        "estimate",
        "--predictions",
        p(&preds_path),
        "--mean-y",
        "1",
        "--var-y",
        "1",
        "--output",
        p(&again),
    ]);
    assert_eq!(fs::read(&report).unwrap(), fs::read(&again).unwrap());
}

fn reorder_columns(src: &Path, dst: &Path, drop: Option<&str>) {
    let text = fs::read_to_string(src).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    let n = rows[0].len();
    let mut order: Vec<usize> = std::iter::once(0).chain((1..n).rev()).collect();
    if let Some(name) = drop {
        order.retain(|&k| rows[0][k] != name);
    }
    let out: Vec<String> = rows
        .iter()
        .map(|r| order.iter().map(|&k| r[k]).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(dst, out.join("\n") + "\n").unwrap();
}

#[test]
fn predict_joins_by_name() {
    let dir = TempDir::new().unwrap();
    let (preds, _) = dataset(&dir, &tractable_spec(7));
    let model = dir.path().join("m.json");
    upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--mean-y",
        "1",
        "--var-y",
        "1",
        "--model",
        p(&model),
        "--output",
        p(&dir.path().join("r.json")),
    ]);
    let shuffled = dir.path().join("shuffled.csv");
    reorder_columns(&preds, &shuffled, None);
    let a = upcr(&["predict", "--model", p(&model), "--predictions", p(&preds)]);
    let b = upcr(&[
        "predict",
        "--model",
        p(&model),
        "--predictions",
        p(&shuffled),
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let missing = dir.path().join("missing.csv");
    reorder_columns(&preds, &missing, Some("expert2"));
    let out = upcr(&[
        "predict",
        "--model",
        p(&model),
        "--predictions",
        p(&missing),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("expert2"));
}

#[test]
fn zero_weight_model_predicts_the_mean() {
    let dir = TempDir::new().unwrap();
    let (preds, _) = dataset(&dir, &tractable_spec(8));
    let model = dir.path().join("m.json");
    upcr(&[
        "estimate",
        "--predictions",
        p(&preds),
        "--mean-y",
        "2.5",
        "--var-y",
        "1",
        "--model",
        p(&model),
        "--output",
        p(&dir.path().join("r.json")),
    ]);
    let mut v = read_json(&model);
    for w in v["weights"].as_array_mut().unwrap() {
        *w = Value::from(0.0);
    }
    fs::write(&model, v.to_string()).unwrap();
    let out = upcr(&["predict", "--model", p(&model), "--predictions", p(&preds)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",2.5")));
}

#[test]
fn simulate_outputs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = upcr(&[
        "simulate",
        "--epsilon",
        "0",
        "--m",
        "5",
        "--n",
        "100",
        "--seed",
        "9",
        "--output",
        p(&a),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let preds = read_predictions(&a.join("predictions.csv")).unwrap();
    assert_eq!(preds.num_regressors(), 5);
    for i in 1..5 {
        assert_eq!(preds.regressor(i), preds.regressor(0));
    }
    let truth = read_json(&a.join("truth.json"));
    for key in ["g2", "rho", "a", "c_population"] {
        assert!(!truth[key].is_null(), "{key}");
    }

    upcr(&[
        "simulate",
        "--epsilon",
        "0",
        "--m",
        "5",
        "--n",
        "100",
        "--seed",
        "9",
        "--output",
        p(&b),
    ]);
    for f in ["predictions.csv", "labels.csv", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn simulate_matches_library_generator() {
    let dir = TempDir::new().unwrap();
    let out = upcr(&[
        "simulate",
        "--signal",
        "friedman1",
        "--m",
        "3",
        "--n",
        "50",
        "--epsilon",
        "0.2",
        "--a-values=0.5,-0.5,0",
        "--seed",
        "12",
        "--output",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut spec = SyntheticEnsembleSpec::new(3, 50, Signal::Friedman1, 0.2, 12);
    spec.a_values = vec![0.5, -0.5, 0.0];
    let data = generate(&spec).unwrap();
    let labels = read_labels(&dir.path().join("labels.csv")).unwrap();
    assert_eq!(labels.values, data.labels);
    assert_eq!(
        read_predictions(&dir.path().join("predictions.csv")).unwrap(),
        data.predictions
    );
}

#[test]
fn simulate_rejects_invalid_spec() {
    let dir = TempDir::new().unwrap();
    let out = upcr(&[
        "simulate",
        "--m",
        "3",
        "--h-variances",
        "1,2",
        "--output",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

fn eval_csv(path: &Path) -> Vec<(String, Option<f64>)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().ok())
        })
        .collect()
}

fn score(table: &[(String, Option<f64>)], method: &str) -> Option<f64> {
    table.iter().find(|(m, _)| m == method).unwrap().1
}

#[test]
fn eval_exact_expert_scores_zero() {
    let dir = TempDir::new().unwrap();
    let preds = write(
        &dir,
        "p.csv",
        "sample_id,a,b,c\ns0,1,0,5\ns1,2,1,3\ns2,3,1,4\ns3,4,3,0\n",
    );
    let labels = write(&dir, "y.csv", "sample_id,y\ns3,4\ns1,2\ns0,1\ns2,3\n");
    let table = dir.path().join("t.csv");
    let out = upcr(&[
        "eval",
        "--predictions",
        p(&preds),
        "--labels",
        p(&labels),
        "--output",
        p(&table),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = eval_csv(&table);
    assert_eq!(score(&t, "best_single"), Some(0.0));
}

#[test]
fn eval_single_expert() {
    let dir = TempDir::new().unwrap();
    let preds = write(&dir, "p.csv", "sample_id,a\ns0,1\ns1,2.5\ns2,2\n");
    let labels = write(&dir, "y.csv", "sample_id,y\ns0,1\ns1,2\ns2,3\n");
    let table = dir.path().join("t.csv");
    let out = upcr(&[
        "eval",
        "--predictions",
        p(&preds),
        "--labels",
        p(&labels),
        "--output",
        p(&table),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = eval_csv(&table);
    let var = 2.0 / 3.0;
    let raw = (0.0 + 0.25 + 1.0) / 3.0 / var;
    assert!((score(&t, "mean").unwrap() - raw).abs() < 1e-12);
    assert_eq!(score(&t, "mean"), score(&t, "median"));
    assert_eq!(score(&t, "upcr"), None);
}

#[test]
fn eval_label_mismatch() {
    let dir = TempDir::new().unwrap();
    let preds = write(&dir, "p.csv", "sample_id,a\ns0,1\ns1,2\n");
    let labels = write(&dir, "y.csv", "sample_id,y\ns0,1\nsX,2\n");
    let out = upcr(&["eval", "--predictions", p(&preds), "--labels", p(&labels)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("s1"));
}

#[test]
fn eval_orders_oracle_upcr_mean() {
    // Eight useful experts close to the signal plus two junk experts that the
    // plain mean cannot discount.
    let dir = TempDir::new().unwrap();
    let mut spec =
        SyntheticEnsembleSpec::new(10, 5000, Signal::Normal { g2: 0.8, mean: 0.0 }, 0.15, 13);
    spec.h_variances = vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 75.0, 75.0];
    spec.a_values = vec![0.4, -0.4, 0.3, -0.3, 0.4, -0.4, 0.3, -0.3, -4.0, -4.0];
    spec.noise_var = Some(0.2);
    let (preds, labels) = dataset(&dir, &spec);
    let table = dir.path().join("t.csv");
    let out = upcr(&[
        "eval",
        "--predictions",
        p(&preds),
        "--labels",
        p(&labels),
        "--mean-y",
        "0",
        "--var-y",
        "1",
        "--output",
        p(&table),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = eval_csv(&table);
    let (oracle, upcr_score, mean) = (
        score(&t, "oracle").unwrap(),
        score(&t, "upcr").unwrap(),
        score(&t, "mean").unwrap(),
    );
    assert!(
        oracle <= upcr_score && upcr_score <= mean,
        "{oracle} {upcr_score} {mean}"
    );
}
