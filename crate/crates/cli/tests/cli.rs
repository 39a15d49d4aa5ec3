//! End-to-end tests of the binary: exit codes, file contracts, and the
//! stored-trajectory round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regsim"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    regsim().args(args).current_dir(dir).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn run_scalar_defaults_writes_contracted_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "scalar-equilibrium", "--out", "o"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("o/scalar-equilibrium.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,x_1,theta_1,theta_hat_1,xi_1,nu_1,eps0,eps1,eps2,u_1,psi,varphi_psi"
    );
    assert!(!csv.contains('\r'), "newline must be plain \\n");
    // 17 significant digits per value.
    let first_value = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert!(first_value.len() >= 18, "short mantissa: {first_value}");

    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/scalar-equilibrium.verdict.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["schema_version"], 1);
    assert_eq!(verdict["hard_pass"], true);
    let checks = verdict["checks"].as_array().unwrap();
    let pe = checks.iter().find(|c| c["name"] == "pe-gramian").unwrap();
    assert_eq!(pe["pass"], false, "scalar regressor vanishes");
    assert_eq!(pe["informational"], true);
    assert!(pe["note"].as_str().unwrap().contains("regressor vanishes"));
}

#[test]
fn run_rejects_bad_horizon_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "scalar-equilibrium", "--t-end", "-1", "--out", "o"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("integration.t_end"), "field path missing: {err}");
}

#[test]
fn run_hopf_drift_reports_positive_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "hopf-circle-drift", "--out", "o"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let verdict: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/hopf-circle-drift.verdict.json")).unwrap(),
    )
    .unwrap();
    let checks = verdict["checks"].as_array().unwrap();
    let fit = checks.iter().find(|c| c["name"] == "exp-rate-fit").unwrap();
    assert_eq!(fit["pass"], true);
    assert!(fit["measured"].as_f64().unwrap() > 0.0, "fitted rate must be positive");
}

#[test]
fn verify_builtin_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["verify", "scalar-equilibrium", "--out", "o"]);
    assert_eq!(code(&out), 0);
    let verdict: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/scalar-equilibrium.verify.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(verdict["hard_pass"], true);
    assert_eq!(verdict["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_indefinite_h_fails_with_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("indefinite-h.toml");
    let out = run_in(dir.path(), &["verify", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("h-positive-definite"), "stderr: {err}");
    let verdict: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/invalid-drift-metric.verify.json")).unwrap(),
    )
    .unwrap();
    let check = &verdict["checks"][0];
    assert_eq!(check["pass"], false);
    assert!(check["note"].as_str().unwrap().contains("not positive definite"));
}

#[test]
fn verify_origin_region_reports_worst_violator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("hopf-origin-region.toml");
    let out = run_in(dir.path(), &["verify", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&out), 1);
    let verdict: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/hopf-origin-region.verify.json")).unwrap(),
    )
    .unwrap();
    let checks = verdict["checks"].as_array().unwrap();
    let dissipation = checks.iter().find(|c| c["name"] == "dissipation-inequality").unwrap();
    assert_eq!(dissipation["pass"], false);
    let worst = dissipation["worst_state"].as_array().unwrap();
    assert_eq!(worst.len(), 2, "violator coordinates reported");
    let norm = worst.iter().map(|v| v.as_f64().unwrap().powi(2)).sum::<f64>().sqrt();
    assert!(norm < 0.2, "violator should sit near the origin, norm {norm}");
    for name in ["drift-contraction", "gradient-bound", "target-invariance"] {
        let c = checks.iter().find(|c| c["name"] == name).unwrap();
        assert_eq!(c["pass"], true, "{name} should be unaffected");
    }
}

#[test]
fn report_round_trip_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "scalar-equilibrium", "--out", "a"]);
    assert_eq!(code(&out), 0);
    let out = run_in(
        dir.path(),
        &["report", "a/scalar-equilibrium.csv", "scalar-equilibrium", "--out", "b"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let a = fs::read(dir.path().join("a/scalar-equilibrium.verdict.json")).unwrap();
    let b = fs::read(dir.path().join("b/scalar-equilibrium.verdict.json")).unwrap();
    assert_eq!(a, b, "verdicts must be byte-identical");
}

#[test]
fn report_rejects_truncated_csv_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "scalar-equilibrium", "--out", "a"]);
    assert_eq!(code(&out), 0);
    let csv_path = dir.path().join("a/scalar-equilibrium.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    // Chop a row mid-field.
    let broken = &lines[500][..lines[500].len() / 2];
    lines[500] = broken;
    fs::write(&csv_path, lines.join("\n")).unwrap();
    let out = run_in(
        dir.path(),
        &["report", "a/scalar-equilibrium.csv", "scalar-equilibrium", "--out", "b"],
    );
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 501"), "row number missing: {err}");
}

#[test]
fn report_on_subsampled_csv_passes_with_scaled_slack() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "scalar-equilibrium", "--out", "a"]);
    assert_eq!(code(&out), 0);
    // Keep every 4th sample.
    let csv_path = dir.path().join("a/scalar-equilibrium.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    let mut kept = vec![lines.next().unwrap().to_string()];
    for (i, line) in lines.enumerate() {
        if i % 4 == 0 {
            kept.push(line.to_string());
        }
    }
    let sub_path = dir.path().join("a/subsampled.csv");
    fs::write(&sub_path, kept.join("\n") + "\n").unwrap();
    // Slack scaled by the stride; the coarser grid also coarsens the
    // finite-difference consistency residual by stride^2.
    let cfg_path = dir.path().join("stride.toml");
    fs::write(
        &cfg_path,
        "scenario = \"scalar-equilibrium\"\nname = \"stride\"\n\n[diagnostics]\n\
         monotonicity_slack = 4e-6\nfinite_form_tol = 2e-4\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["report", "a/subsampled.csv", cfg_path.to_str().unwrap(), "--out", "b"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b/stride.verdict.json")).unwrap())
            .unwrap();
    for name in ["lyapunov-theta-monotone", "lyapunov-xi-monotone"] {
        let c = verdict["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap();
        assert_eq!(c["pass"], true, "{name} must hold on the coarser grid");
    }
}

#[test]
fn inline_poly_config_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("scalar-inline-poly.toml");
    let out = run_in(dir.path(), &["run", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/scalar-inline-poly.verdict.json").exists());
}

#[test]
fn mode_flag_switches_controller() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["run", "hopf-circle-kappa-zero", "--mode", "theorem1", "--t-end", "5", "--out", "o"],
    );
    // Short horizon: convergence/observer checks will not have settled, so
    // only assert the run completed and produced files.
    assert!(code(&out) == 0 || code(&out) == 1);
    assert!(dir.path().join("o/hopf-circle-kappa-zero.csv").exists());
}

#[test]
fn plot_flag_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["run", "scalar-equilibrium", "--t-end", "2", "--out", "o", "--plot"],
    );
    assert!(code(&out) == 0 || code(&out) == 1);
    let svg = fs::read_to_string(dir.path().join("o/scalar-equilibrium.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("Lyapunov"));
}

#[test]
fn parallel_jobs_produce_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "run",
            "scalar-equilibrium",
            "hopf-circle-kappa-zero",
            "--jobs",
            "2",
            "--out",
            "o",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/scalar-equilibrium.verdict.json").exists());
    assert!(dir.path().join("o/hopf-circle-kappa-zero.verdict.json").exists());
}

#[test]
fn unknown_scenario_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["run", "no-such-benchmark", "--out", "o"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn adaptive_config_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("hopf-drift.toml");
    let out = run_in(dir.path(), &["run", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/hopf-drift-adaptive.csv")).unwrap();
    // Step doubling should land well under the fixed-step sample count.
    assert!(csv.lines().count() < 60_000);
}

#[test]
fn blowup_exits_3_with_not_evaluated_verdict() {
    let dir = tempfile::tempdir().unwrap();
    // x' = x^2 with no control authority escapes in finite time.
    let cfg_path = dir.path().join("blowup.toml");
    fs::write(
        &cfg_path,
        r#"
name = "blowup"

[plant]
n = 1
m = 1
d = 1
f = { poly = [[{ c = 1.0, p = [2] }]] }
gu = [[0.0]]
phi = { poly = [[{ c = 0.0, p = [1] }]] }
lipschitz = [0.0]

[drift]
s = { poly = [[]] }
js = { poly_matrix = [[[]]] }
h = [[1.0]]
theta_box = [[-1.0, 1.0]]

[target]
u0 = { poly = [[]] }
psi = { poly = [[{ c = 1.0, p = [1] }]] }
grad_psi = { poly = [[{ c = 1.0, p = [0] }]] }
varphi = { poly = [[{ c = 1.0, p = [1] }]] }
kappa = { poly = [[{ c = 1.0, p = [0] }]] }
beta_min = 0.5

[initial]
x = [1.0]
theta = [0.0]

[integration]
t_end = 2.0
h = 1e-3
"#,
    )
    .unwrap();
    let out = run_in(dir.path(), &["run", cfg_path.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/blowup.verdict.json")).unwrap())
            .unwrap();
    let t = verdict["failure"]["t"].as_f64().unwrap();
    assert!(t > 0.5 && t < 1.5, "failure near the escape time, got {t}");
    assert_eq!(verdict["hard_pass"], false);
    for c in verdict["checks"].as_array().unwrap() {
        assert_eq!(c["evaluated"], false, "{} must be marked not evaluated", c["name"]);
    }
}
