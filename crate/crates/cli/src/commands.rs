//! The three subcommands: run, verify, report.

use std::fs;
use std::path::{Path, PathBuf};

use regsim_core::diagnostics::{self, CheckResult, Report, Verdict, SCHEMA_VERSION};
use regsim_core::integrate;
use regsim_core::scenario::Scenario;
use regsim_core::Error;

use crate::config::{self, Overrides};
use crate::{csv_io, plot, CliError};

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))
}

/// Output paths for one scenario under the chosen directory.
pub struct OutPaths {
    pub csv: PathBuf,
    pub verdict: PathBuf,
    pub svg: PathBuf,
}

pub fn out_paths(out: &Path, scenario: &str) -> OutPaths {
    OutPaths {
        csv: out.join(format!("{scenario}.csv")),
        verdict: out.join(format!("{scenario}.verdict.json")),
        svg: out.join(format!("{scenario}.svg")),
    }
}

/// Runs one scenario end to end; returns the process exit code.
pub fn run_one(sc: &Scenario, out: &Path, plot_toggle: bool) -> Result<u8, CliError> {
    ensure_out_dir(out)?;
    let paths = out_paths(out, &sc.name);
    match integrate::integrate(&sc.models, &sc.s0, &sc.integration) {
        Ok(traj) => {
            csv_io::write_trajectory(&paths.csv, &sc.models, &traj)?;
            let report =
                diagnostics::report(&traj, &sc.models, &sc.diagnostics, &sc.report_context())
                    .map_err(|e| CliError::Config(e.to_string()))?;
            write_json(&paths.verdict, &report)?;
            if plot_toggle {
                let svg = plot::render(&sc.models, &traj, &sc.name);
                fs::write(&paths.svg, svg).map_err(|e| {
                    CliError::Config(format!("cannot write {}: {e}", paths.svg.display()))
                })?;
            }
            eprintln!(
                "{}: {} samples -> {} ({})",
                sc.name,
                traj.len(),
                paths.csv.display(),
                if report.hard_pass { "all hard checks pass" } else { "hard check failure" }
            );
            Ok(if report.hard_pass { 0 } else { 1 })
        }
        Err(e @ (Error::NonFiniteState { .. } | Error::MaxStepsExceeded { .. })) => {
            let t = match e {
                Error::NonFiniteState { t } => t,
                Error::MaxStepsExceeded { t, .. } => t,
                _ => unreachable!(),
            };
            let report = diagnostics::report_not_evaluated(
                &sc.report_context(),
                t,
                &e.to_string(),
            );
            write_json(&paths.verdict, &report)?;
            eprintln!("{}: integration failed: {e}", sc.name);
            Ok(3)
        }
        Err(other) => Err(CliError::Config(other.to_string())),
    }
}

pub fn cmd_run(
    specs: &[String],
    over: &Overrides,
    out: &Path,
    plot_toggle: bool,
    jobs: usize,
) -> u8 {
    // Scenarios are built up front so config errors surface before any
    // integration starts.
    let mut scenarios = Vec::new();
    for spec in specs {
        let mut sc = match config::load_scenario(spec) {
            Ok(sc) => sc,
            Err(e) => {
                eprintln!("{spec}: {e}");
                return 2;
            }
        };
        if let Err(e) = config::apply_overrides(&mut sc, over) {
            eprintln!("{spec}: {e}");
            return 2;
        }
        scenarios.push(sc);
    }

    let jobs = jobs.max(1).min(scenarios.len().max(1));
    let results: Vec<u8> = if jobs == 1 || scenarios.len() <= 1 {
        scenarios.iter().map(|sc| run_and_log(sc, out, plot_toggle)).collect()
    } else {
        let mut results = vec![0u8; scenarios.len()];
        let chunk = scenarios.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            for (slot, batch) in results.chunks_mut(chunk).zip(scenarios.chunks(chunk)) {
                scope.spawn(move || {
                    for (r, sc) in slot.iter_mut().zip(batch) {
                        *r = run_and_log(sc, out, plot_toggle);
                    }
                });
            }
        });
        results
    };

    if results.iter().any(|&c| c == 2) {
        2
    } else if results.iter().any(|&c| c == 3) {
        3
    } else if results.iter().any(|&c| c == 1) {
        1
    } else {
        0
    }
}

fn run_and_log(sc: &Scenario, out: &Path, plot_toggle: bool) -> u8 {
    match run_one(sc, out, plot_toggle) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}: {e}", sc.name);
            2
        }
    }
}

/// Assumption verification only. An H that fails the positive-definiteness
/// gate is itself a verification failure, so it is reported as a failed
/// check (exit 1), not as a config error.
pub fn cmd_verify(spec: &str, out: &Path) -> u8 {
    let verdict_result: Result<(String, Verdict), CliError> = match config::load_scenario(spec) {
        Ok(sc) => {
            let verdict = diagnostics::verify_assumptions(&sc.models, &sc.diagnostics);
            Ok((sc.name.clone(), verdict))
        }
        Err(CliError::NotPositiveDefinite(message)) => {
            let mut check = CheckResult {
                name: "h-positive-definite".to_string(),
                pass: false,
                informational: false,
                evaluated: true,
                measured: None,
                threshold: None,
                worst_time: None,
                worst_state: None,
                note: Some(message),
            };
            check.note.get_or_insert_with(String::new);
            Ok(("invalid-drift-metric".to_string(), Verdict { checks: vec![check] }))
        }
        Err(e) => Err(e),
    };
    match verdict_result {
        Ok((name, verdict)) => {
            if ensure_out_dir(out).is_err() {
                return 2;
            }
            let path = out.join(format!("{name}.verify.json"));
            let report = Report {
                schema_version: SCHEMA_VERSION,
                scenario: name.clone(),
                failure: None,
                checks: verdict.checks.clone(),
                hard_pass: verdict.hard_pass(),
            };
            if let Err(e) = write_json(&path, &report) {
                eprintln!("{e}");
                return 2;
            }
            for c in &verdict.checks {
                eprintln!(
                    "{name}: {} {} (measured {:?}, threshold {:?})",
                    c.name,
                    if c.pass { "pass" } else { "FAIL" },
                    c.measured,
                    c.threshold
                );
            }
            if verdict.hard_pass() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{spec}: {e}");
            2
        }
    }
}

/// Re-runs the diagnostics over a stored trajectory; the verdict must be
/// byte-identical to the one from run time given the same tool version.
pub fn cmd_report(csv: &Path, spec: &str, out: &Path) -> u8 {
    let sc = match config::load_scenario(spec) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{spec}: {e}");
            return 2;
        }
    };
    let traj = match csv_io::read_trajectory(csv, &sc.models) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", csv.display());
            return 2;
        }
    };
    let report =
        match diagnostics::report(&traj, &sc.models, &sc.diagnostics, &sc.report_context()) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("{}: {e}", csv.display());
                return 2;
            }
        };
    if ensure_out_dir(out).is_err() {
        return 2;
    }
    let path = out.join(format!("{}.verdict.json", sc.name));
    if let Err(e) = write_json(&path, &report) {
        eprintln!("{e}");
        return 2;
    }
    eprintln!("{}: verdict rebuilt at {}", sc.name, path.display());
    if report.hard_pass {
        0
    } else {
        1
    }
}
