//! End-to-end tests of the `misspca` binary: exit codes, error codes on
//! standard error, and output file contracts.

use std::path::Path;
use std::process::{Command, Output};

use misspca::simulation::{
    apply_mask, build_spiked, make_sparse_theta, sample_gaussian, SpikedModel, ThetaMode,
};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misspca"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stderr_line(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).lines().last().unwrap_or_default().to_string()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn fit_reports_identity_debias_on_complete_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write(
        &input,
        "1.0,0.5,0.25,0.1\n-1.0,2.0,0.0,0.3\n0.5,-0.5,1.5,-0.2\n2.0,0.1,-1.0,0.4\n-0.5,1.0,0.5,-0.1\n0.7,-1.2,0.3,0.6\n",
    );
    let out = dir.path().join("fit.json");
    let result = run(&[
        "fit",
        "--input-path",
        input.to_str().unwrap(),
        "--output-path",
        out.to_str().unwrap(),
        "--lambda-rule",
        "fixed:0.1",
        "--sbar-mode",
        "unconstrained",
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["delta"], 1.0);
    assert_eq!(json["debias_identity"], true);
    assert_eq!(json["delta_mode"], "estimate");
    assert_eq!(json["n"], 6);
    assert_eq!(json["p"], 4);
}

#[test]
fn fit_recovers_planted_support_with_data_driven_rule() {
    // Spiked sample with known ground truth: p=10, spike on {0,1,2},
    // delta=0.8, n=2000.
    let theta = make_sparse_theta(10, 3, ThetaMode::Flat, 0).unwrap();
    let model = SpikedModel::isotropic(theta, 4.0, 1.0).unwrap();
    let sigma = build_spiked(&model);
    let x = sample_gaussian(&sigma, 2000, 1001).unwrap();
    let sample = apply_mask(&x, 0.8, 1002).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("spiked.csv");
    write(&input, &sample.to_csv_string());
    let out = dir.path().join("fit.json");
    let result = run(&[
        "fit",
        "--input-path",
        input.to_str().unwrap(),
        "--output-path",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["estimate"]["support"], serde_json::json!([0, 1, 2]));
    assert_eq!(json["lambda_rule"], "data_driven");
    assert_eq!(json["solver"]["requested"], "auto");
    assert_eq!(json["solver"]["resolved"], "exact");
    let delta_hat = json["delta"].as_f64().unwrap();
    assert!((delta_hat - 0.8).abs() < 0.02);
}

#[test]
fn fit_rejects_degenerate_inputs() {
    let dir = tempfile::tempdir().unwrap();

    let empty = dir.path().join("empty.csv");
    write(&empty, "");
    let result = run(&["fit", "--input-path", empty.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));

    let one_row = dir.path().join("one.csv");
    write(&one_row, "1,2,3\n");
    let result = run(&["fit", "--input-path", one_row.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_line(&result).starts_with("TOO_FEW_ROWS:"));

    let hole = dir.path().join("hole.csv");
    write(&hole, "1,,2\n3,NA,4\n0.5,nan,1\n");
    let result = run(&["fit", "--input-path", hole.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    assert!(stderr_line(&result).starts_with("EMPTY_COLUMN:"));

    let missing = dir.path().join("nonexistent.csv");
    let result = run(&["fit", "--input-path", missing.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_line(&result).starts_with("IO:"));
}

#[test]
fn fit_refuses_unseeded_randomness() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write(&input, "1,2\n2,1\n1.5,0.5\n0.5,1.5\n");

    let base = ["fit", "--input-path", input.to_str().unwrap(), "--lambda-rule", "fixed:0.1",
        "--sbar-mode", "unconstrained", "--solver", "truncated_power"];
    let result = run(&base);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_line(&result).starts_with("MISSING_SEED:"));

    let mut seeded = base.to_vec();
    seeded.extend(["--seed", "7"]);
    assert!(run(&seeded).status.success());

    // A single deterministic restart needs no seed.
    let mut single = base.to_vec();
    single.extend(["--restarts", "1"]);
    assert!(run(&single).status.success());
}

const GRID: &str = "\
n = 200
p = 5
s = 2
delta = 0.8
sigma1 = 6.0
sigma2 = 1.0
replicates = 1
seed = 3
lambda_rule = theoretical
";

#[test]
fn simulate_writes_report_and_sidecar_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.cfg");
    write(&config, GRID);
    let out = dir.path().join("report.csv");

    let result = run(&["simulate", config.to_str().unwrap(), "--output-path", out.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    assert!(String::from_utf8_lossy(&result.stderr).contains("cell 1/1"));

    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus exactly one data row:\n{csv}");
    let sidecar = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(sidecar.contains("\"root_seed\": 3"));

    let result = run(&["simulate", config.to_str().unwrap(), "--output-path", out.to_str().unwrap()]);
    assert!(result.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), csv);
}

#[test]
fn simulate_rejects_zero_delta_with_stable_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.cfg");
    write(&config, &GRID.replace("delta = 0.8", "delta = 0.0, 0.8"));
    let out = dir.path().join("report.csv");

    let result = run(&["simulate", config.to_str().unwrap(), "--output-path", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_line(&result).starts_with("BAD_DELTA:"));
    assert!(!out.exists());
}

const STUDY: &str = "\
n = 400
p = 6
s = 2
sigma1 = 4.0
sigma2 = 1.0
delta = 1.0
seed = 12
t = 1.0
s_min = 1
s_max = 6
";

#[test]
fn deviation_writes_profile_rows_for_every_size() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.cfg");
    write(&config, STUDY);
    let out = dir.path().join("profile.csv");

    let result = run(&["deviation", config.to_str().unwrap(), "--output-path", out.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 7, "header plus six rows:\n{csv}");
    assert!(csv.starts_with("s,z,zeta,sigma_max,ratio\n"));
    let sidecar = std::fs::read_to_string(dir.path().join("profile.json")).unwrap();
    assert!(sidecar.contains("\"s_max\": 6"));
}

#[test]
fn deviation_rejects_oversized_ranges_and_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("profile.csv");

    let config = dir.path().join("wide.cfg");
    write(&config, &STUDY.replace("s_max = 6", "s_max = 7"));
    let result = run(&["deviation", config.to_str().unwrap(), "--output-path", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_line(&result).starts_with("BAD_SBAR:"));

    let config = dir.path().join("huge.cfg");
    write(
        &config,
        &STUDY.replace("p = 6", "p = 50").replace("s_max = 6", "s_max = 25").replace("n = 400", "n = 10"),
    );
    let result = run(&["deviation", config.to_str().unwrap(), "--output-path", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    assert!(stderr_line(&result).starts_with("BUDGET:"));
}
