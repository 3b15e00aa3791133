//! End-to-end tests of the penfit binary: exit codes, file outputs, option
//! precedence, and byte-level determinism.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_penfit")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

/// Tiny multiplicative congruential generator so fixtures need no RNG crate.
struct Lcg(u64);

impl Lcg {
    fn next_unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        // Top 53 bits, mapped to [-1, 1).
        ((self.0 >> 11) as f64) / (1u64 << 52) as f64 - 1.0
    }
}

/// Gaussian toy dataset: five features, two of them predictive.
fn write_gaussian_csv(dir: &Path, n: usize) -> PathBuf {
    let mut rng = Lcg(42);
    let mut text = String::from("y,x1,x2,x3,x4,x5\n");
    for _ in 0..n {
        let x: Vec<f64> = (0..5).map(|_| rng.next_unit()).collect();
        let y = 1.5 * x[0] - 1.0 * x[1] + 0.3 * rng.next_unit();
        let _ = write!(text, "{y:.6}");
        for v in &x {
            let _ = write!(text, ",{v:.6}");
        }
        text.push('\n');
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn write_survival_csv(dir: &Path, n: usize) -> PathBuf {
    let mut rng = Lcg(7);
    let mut text = String::from("time,status,x1,x2,x3,x4\n");
    for i in 0..n {
        let x: Vec<f64> = (0..4).map(|_| rng.next_unit()).collect();
        let risk = (0.9 * x[0] - 0.7 * x[1]).exp();
        let time = (1.0 + rng.next_unit().abs()) / risk;
        let status = u8::from(i % 4 != 0);
        let _ = write!(text, "{time:.6},{status}");
        for v in &x {
            let _ = write!(text, ",{v:.6}");
        }
        text.push('\n');
    }
    let path = dir.join("surv.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// Output files are reproducible except for the creation-time line.
fn strip_created(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# created"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn fit_happy_path_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 50);
    let out = run_in(
        dir.path(),
        &[
            "fit",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--penalty",
            "lasso",
            "--nlambda",
            "20",
            "--out",
            "fit.json",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let text = std::fs::read_to_string(dir.path().join("fit.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["family"], "gaussian");
    assert_eq!(v["meta"]["tool"], "penfit");
    assert!(v["meta"]["config_sha256"].as_str().unwrap().len() == 16);
    let lambda = v["lambda"].as_array().unwrap();
    assert_eq!(lambda.len(), 20);
    assert!(lambda
        .windows(2)
        .all(|w| w[0].as_f64().unwrap() > w[1].as_f64().unwrap()));
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 20);
    assert_eq!(v["coefficients"][0].as_array().unwrap().len(), 5);
    // The null model opens the path.
    assert_eq!(v["active_count"][0], 0);
    let kkt: Vec<f64> = v["kkt_residual"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(kkt.iter().all(|&r| r <= 1e-4));
}

#[test]
fn fit_runs_on_the_bundled_toy_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.csv");
    let out = run_in(
        dir.path(),
        &[
            "fit",
            "--family",
            "binomial",
            "--penalty",
            "lasso",
            "--y",
            "outcome",
            data,
            "--nlambda",
            "25",
            "--out",
            "toy.json",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("toy.json")).unwrap())
            .unwrap();
    assert_eq!(v["family"], "binomial");
    assert_eq!(v["feature_names"][0], "age_z");
}

#[test]
fn fit_infers_binomial_and_cox() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Lcg(3);
    let mut text = String::from("outcome,x1,x2,x3\n");
    for _ in 0..60 {
        let x: Vec<f64> = (0..3).map(|_| rng.next_unit()).collect();
        let y = u8::from(1.2 * x[0] - 0.8 * x[1] + 0.5 * rng.next_unit() > 0.0);
        let _ = writeln!(text, "{y},{:.6},{:.6},{:.6}", x[0], x[1], x[2]);
    }
    let data = dir.path().join("bin.csv");
    std::fs::write(&data, text).unwrap();
    let out = run_in(
        dir.path(),
        &["fit", "--data", "bin.csv", "--y", "outcome", "--nlambda", "10", "--out", "b.json"],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(v["family"], "binomial");

    let surv = write_survival_csv(dir.path(), 50);
    let out = run_in(
        dir.path(),
        &[
            "fit",
            surv.to_str().unwrap(),
            "--y",
            "time",
            "--status",
            "status",
            "--nlambda",
            "10",
            "--out",
            "s.json",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(v["family"], "cox");
}

#[test]
fn missing_y_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 30);
    let out = run_in(dir.path(), &["fit", data.to_str().unwrap(), "--out", "f.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("--y"));
    assert!(!dir.path().join("f.json").exists());
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run_in(dir.path(), &["fit", "--help"]).status.code(), Some(0));
    assert_eq!(run_in(dir.path(), &["--version"]).status.code(), Some(0));
    // An unknown flag is a usage error with clap's message but exit code 1.
    assert_eq!(run_in(dir.path(), &["fit", "--bogus"]).status.code(), Some(1));
}

#[test]
fn malformed_cells_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "y,x1,x2\n1.0,2.0,3.0\n2.0,oops,4.0\n").unwrap();
    let out = run_in(
        dir.path(),
        &["fit", "--data", "bad.csv", "--y", "y", "--out", "f.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("x1") && err.contains("row 2"), "message: {err}");

    std::fs::write(dir.path().join("gap.csv"), "y,x1,x2\n1.0,2.0,\n2.0,1.0,4.0\n").unwrap();
    let out = run_in(
        dir.path(),
        &["fit", "--data", "gap.csv", "--y", "y", "--out", "f.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("missing value"));
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // Logistic fitting cannot reach its intercept in a single sweep, so a
    // budget of one fails at the first lambda, which is a hard error.
    let mut rng = Lcg(12);
    let mut text = String::from("y,x1,x2,x3\n");
    for i in 0..40 {
        let y = u8::from(i < 25);
        let _ = writeln!(
            text,
            "{y},{:.6},{:.6},{:.6}",
            rng.next_unit(),
            rng.next_unit(),
            rng.next_unit()
        );
    }
    std::fs::write(dir.path().join("bin.csv"), text).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "fit",
            "--data",
            "bin.csv",
            "--y",
            "y",
            "--family",
            "binomial",
            "--max-sweeps",
            "1",
            "--out",
            "f.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("lambda index 0"), "message: {err}");
    assert!(err.contains("residual"), "message: {err}");
    assert!(!dir.path().join("f.json").exists());
}

#[test]
fn mfdr_from_fit_matches_mfdr_from_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 50);
    let path = data.to_str().unwrap();
    let fit = run_in(
        dir.path(),
        &["fit", path, "--y", "y", "--nlambda", "15", "--out", "fit.json"],
    );
    assert!(fit.status.success(), "stderr: {}", stderr_of(&fit));
    let a = run_in(
        dir.path(),
        &["mfdr", "--fit", "fit.json", "--out", "a.csv", "--plot-out", "a-plot.csv"],
    );
    assert!(a.status.success(), "stderr: {}", stderr_of(&a));
    let b = run_in(
        dir.path(),
        &["mfdr", path, "--y", "y", "--nlambda", "15", "--out", "b.csv"],
    );
    assert!(b.status.success(), "stderr: {}", stderr_of(&b));

    let rows = |name: &str| -> Vec<String> {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    };
    assert_eq!(rows("a.csv"), rows("b.csv"));
    assert_eq!(rows("a.csv").len(), 16, "header plus one row per lambda");
    assert!(dir.path().join("a-plot.csv").exists());
    assert!(dir.path().join("b-plot.csv").exists());
}

#[test]
fn mfdr_with_no_qualifying_lambda_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 50);
    let fit = run_in(
        dir.path(),
        &["fit", data.to_str().unwrap(), "--y", "y", "--nlambda", "8", "--out", "fit.json"],
    );
    assert!(fit.status.success());
    // Huge curvatures push every per-feature tail probability toward 1, so
    // the estimate is 100% wherever anything is selected.
    let text = std::fs::read_to_string(dir.path().join("fit.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let steps = v["lambda"].as_array().unwrap().len();
    let p = v["feature_names"].as_array().unwrap().len();
    for k in 0..steps {
        for j in 0..p {
            v["internal"]["v_hat"][k][j] = serde_json::json!(1e18);
        }
    }
    std::fs::write(dir.path().join("fit.json"), serde_json::to_string(&v).unwrap()).unwrap();

    let out = run_in(
        dir.path(),
        &["mfdr", "--fit", "fit.json", "--alpha", "0.1", "--out", "m.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(table.contains("# rule mfdr<=0.1 none"));
    let data_rows = table.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, steps + 1);
}

#[test]
fn cv_table_and_rule_lines() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 60);
    let out = run_in(
        dir.path(),
        &[
            "cv",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--nlambda",
            "12",
            "--folds",
            "5",
            "--seed",
            "9",
            "--rule",
            "1se",
            "--out",
            "cv.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(dir.path().join("cv.csv")).unwrap();
    assert!(text.contains("# seed 9"));
    assert!(text.contains("# rule 1se lambda"));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("lambda,selected,cv_error,cv_se"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn compare_emits_per_method_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 60);
    let out = run_in(
        dir.path(),
        &[
            "compare",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--alpha",
            "0.1",
            "--seed",
            "11",
            "--out",
            "cmp.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let methods: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("method,"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(methods.contains(&"univariate-bh"));
    // Five univariate rows: one per feature.
    assert_eq!(methods.iter().filter(|m| **m == "univariate-bh").count(), 5);
}

#[test]
fn simulate_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = r#"
name = "toy"
n = 50
p = 8
family = "gaussian"
beta = [0.9, 0.9]

[correlation.autoregressive]
rho = 0.4
"#;
    std::fs::write(dir.path().join("toy.toml"), scenario).unwrap();
    let args = [
        "simulate",
        "--scenario",
        "toy.toml",
        "--reps",
        "4",
        "--seed",
        "21",
        "--nlambda",
        "10",
        "--comparators",
        "--out",
        "sim.csv",
    ];
    let first = run_in(dir.path(), &args);
    assert!(first.status.success(), "stderr: {}", stderr_of(&first));
    let one = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let one_methods = std::fs::read_to_string(dir.path().join("sim-methods.csv")).unwrap();

    let second = run_in(dir.path(), &args);
    assert!(second.status.success());
    let two = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let two_methods = std::fs::read_to_string(dir.path().join("sim-methods.csv")).unwrap();

    assert_eq!(strip_created(&one), strip_created(&two));
    assert_eq!(strip_created(&one_methods), strip_created(&two_methods));
    assert!(one.contains("# seed 21"));
    for method in ["mfdr-rule", "univariate-bh", "sample-split"] {
        assert!(one_methods.contains(method), "missing {method}");
    }
}

#[test]
fn cv_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 50);
    let args = [
        "cv",
        data.to_str().unwrap(),
        "--y",
        "y",
        "--nlambda",
        "10",
        "--folds",
        "4",
        "--seed",
        "3",
        "--out",
    ];
    let mut first_args: Vec<&str> = args.to_vec();
    first_args.push("cv1.csv");
    let mut second_args: Vec<&str> = args.to_vec();
    second_args.push("cv2.csv");
    assert!(run_in(dir.path(), &first_args).status.success());
    assert!(run_in(dir.path(), &second_args).status.success());
    let one = std::fs::read_to_string(dir.path().join("cv1.csv")).unwrap();
    let two = std::fs::read_to_string(dir.path().join("cv2.csv")).unwrap();
    assert_eq!(strip_created(&one), strip_created(&two));
}

#[test]
fn flag_beats_environment_beats_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 40);
    std::fs::write(dir.path().join("penfit.toml"), "nlambda = 5\n").unwrap();
    let base = [
        "fit",
        data.to_str().unwrap(),
        "--y",
        "y",
        "--config",
        "penfit.toml",
        "--out",
        "f.json",
    ];
    let steps = |dir: &Path| -> usize {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("f.json")).unwrap()).unwrap();
        v["lambda"].as_array().unwrap().len()
    };

    assert!(run_in(dir.path(), &base).status.success());
    assert_eq!(steps(dir.path()), 5, "config file value applies");

    let out = Command::new(bin())
        .args(base)
        .env("PENFIT_NLAMBDA", "7")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(steps(dir.path()), 7, "environment overrides the config file");

    let mut with_flag: Vec<&str> = base.to_vec();
    with_flag.extend(["--nlambda", "9"]);
    let out = Command::new(bin())
        .args(&with_flag)
        .env("PENFIT_NLAMBDA", "7")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(steps(dir.path()), 9, "flag overrides the environment");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 40);
    std::fs::write(dir.path().join("penfit.toml"), "nlambdas = 5\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "fit",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--config",
            "penfit.toml",
            "--out",
            "f.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("nlambdas"));
}

#[test]
fn unpenalized_columns_are_flagged_in_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 40);
    let out = run_in(
        dir.path(),
        &[
            "fit",
            data.to_str().unwrap(),
            "--y",
            "y",
            "--unpenalized",
            "x3,x5",
            "--nlambda",
            "6",
            "--out",
            "f.json",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(v["penalized"], serde_json::json!([true, true, false, true, false]));
    // Unpenalized features carry a coefficient from the first step on.
    let first = v["coefficients"][0].as_array().unwrap();
    assert!(first[2].as_f64().unwrap().abs() > 0.0 || first[4].as_f64().unwrap().abs() > 0.0);
}

#[test]
fn fit_writes_csv_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_gaussian_csv(dir.path(), 40);
    let out = run_in(
        dir.path(),
        &["fit", data.to_str().unwrap(), "--y", "y", "--nlambda", "6", "--out", "f.csv"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "lambda,active,kkt_residual,loss,intercept,x1,x2,x3,x4,x5");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);
}

#[test]
fn builtin_scenario_runs_at_tiny_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "simulate",
            "--scenario",
            "linear-independent",
            "--reps",
            "2",
            "--seed",
            "5",
            "--nlambda",
            "8",
            "--out",
            "sim.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    assert!(text.contains("# scenario linear-independent family gaussian n 400 p 100"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["simulate", "--scenario", "no-such-design"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("linear-independent"));
}
