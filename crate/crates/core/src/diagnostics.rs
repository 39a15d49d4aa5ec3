//! Post-hoc diagnostics: the construction's proof devices recast as
//! machine-checkable verdicts over a logged trajectory.
//!
//! Everything here is a pure function of `(Trajectory, Models, config)`:
//! re-running a diagnostic yields an identical report. Quadratures use the
//! logged grid with the trapezoidal rule (accuracy `O(dt^2)`, consistent
//! with the diagnostic tolerances); the one infinite upper limit in the
//! adaptation Lyapunov function is truncated at the final logged time, and
//! the truncation error equals the reported remaining tail mass.
//!
//! Square-integrability cannot be decided from a finite horizon. The finite
//! surrogate used throughout is a tail-mass criterion (tail energy at most
//! a configured fraction of the total), reported next to the raw numbers so
//! a reader can re-judge.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics;
use crate::error::Error;
use crate::integrate::Trajectory;
use crate::linalg::{self, Matrix};
use crate::model::Models;
use crate::num;
use crate::quad::{self, SampleRegion};

/// Slack constants for the assumption sweeps. Every check compares a
/// measured violation margin against its tolerance, so loosening a
/// tolerance can only turn failures into passes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AssumptionTols {
    /// Max admissible eigenvalue of `H J_S + J_S^T H` over the parameter box.
    pub drift_eig: f64,
    /// Slack for the dissipation inequality sweep.
    pub dissipation: f64,
    /// Slack for the gradient-bound sweep.
    pub gradient: f64,
    /// Max residual of the target-invariance check on the level set.
    pub invariance: f64,
}

impl Default for AssumptionTols {
    fn default() -> Self {
        AssumptionTols { drift_eig: 1e-8, dissipation: 1e-8, gradient: 1e-8, invariance: 1e-6 }
    }
}

/// Thresholds and sweep parameters consumed by the diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiagnosticsConfig {
    /// Sliding excitation window length.
    pub pe_window: f64,
    /// Required lower bound on the windowed Gramian minimum eigenvalue.
    pub pe_delta: f64,
    /// Fraction of the horizon discarded before excitation and rate checks.
    pub pe_transient_fraction: f64,
    /// Allowed forward increase of Lyapunov traces, scaled by
    /// `1 + initial value`.
    pub monotonicity_slack: f64,
    /// Final fraction of the horizon treated as the tail.
    pub l2_tail_fraction: f64,
    /// Pass bound: tail energy at most this fraction of the total.
    pub l2_tail_ratio: f64,
    /// Points per assumption sweep.
    pub sample_count: usize,
    /// State-space region swept by the assumption verifier.
    pub sample_region: SampleRegion,
    /// Target-distance bound over the convergence tail.
    pub convergence_threshold: f64,
    /// Final fraction of the horizon over which convergence is required.
    pub convergence_tail_fraction: f64,
    /// Bound on the final observer mismatch.
    pub observer_threshold: f64,
    /// Boundedness cap as a multiple of the initial-condition scale.
    pub bound_cap_factor: f64,
    /// Max admissible finite-form consistency residual.
    pub finite_form_tol: f64,
    /// Max admissible RMS residual (log units) of the decay-rate fit.
    pub rate_fit_residual_max: f64,
    pub tols: AssumptionTols,
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |field, message: alloc::string::String| {
            Err(Error::InvalidConfig { field, message })
        };
        if !(self.pe_window > 0.0) {
            return bad("diagnostics.pe_window", format!("{} must be positive", self.pe_window));
        }
        for (field, v) in [
            ("diagnostics.pe_transient_fraction", self.pe_transient_fraction),
            ("diagnostics.l2_tail_fraction", self.l2_tail_fraction),
            ("diagnostics.convergence_tail_fraction", self.convergence_tail_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(field, format!("{v} must lie in (0, 1)"));
            }
        }
        if self.monotonicity_slack < 0.0 {
            return bad(
                "diagnostics.monotonicity_slack",
                format!("{} must be nonnegative", self.monotonicity_slack),
            );
        }
        if self.sample_count < 2 {
            return bad("diagnostics.sample_count", "need at least 2 sweep samples".into());
        }
        Ok(())
    }

    /// Desk-scale defaults over a `[-2, 2]^n` region.
    pub fn desk_default(n: usize) -> Self {
        DiagnosticsConfig {
            pe_window: 2.0,
            pe_delta: 0.1,
            pe_transient_fraction: 0.25,
            monotonicity_slack: 1e-6,
            l2_tail_fraction: 0.25,
            l2_tail_ratio: 0.05,
            sample_count: 256,
            sample_region: SampleRegion { lo: vec![-2.0; n], hi: vec![2.0; n], min_norm: 0.0 },
            convergence_threshold: 1e-2,
            convergence_tail_fraction: 0.25,
            observer_threshold: 1e-3,
            bound_cap_factor: 10.0,
            finite_form_tol: 1e-3,
            rate_fit_residual_max: 0.5,
            tols: AssumptionTols::default(),
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Informational checks never affect the hard verdict or exit codes.
    pub informational: bool,
    /// `false` when the check could not run (for instance after a
    /// non-finite integration abort).
    pub evaluated: bool,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub worst_time: Option<f64>,
    pub worst_state: Option<Vec<f64>>,
    pub note: Option<String>,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        CheckResult {
            name: name.to_string(),
            pass: false,
            informational: false,
            evaluated: true,
            measured: None,
            threshold: None,
            worst_time: None,
            worst_state: None,
            note: None,
        }
    }
}

/// A bundle of named checks; each name appears exactly once.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Verdict {
    pub checks: Vec<CheckResult>,
}

impl Verdict {
    /// All non-informational checks were evaluated and pass.
    pub fn hard_pass(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.evaluated && c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Full run report: verdict plus failure context, serialized as the
/// versioned JSON the CLI emits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    /// Time and reason of an integration abort, when one happened.
    pub failure: Option<FailureNote>,
    pub checks: Vec<CheckResult>,
    pub hard_pass: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FailureNote {
    pub t: f64,
    pub reason: String,
}

pub const SCHEMA_VERSION: u32 = 1;

/// Scenario metadata the report needs beyond the raw models.
pub struct ReportContext<'a> {
    pub scenario_name: &'a str,
    /// Whether persistent excitation is expected to hold for this scenario;
    /// when false the excitation and rate-fit checks are informational.
    pub expect_pe: bool,
    pub pe_note: Option<&'a str>,
    pub asserted_assumptions: &'a [String],
}

/// Names of every check a run report carries, in emission order.
pub const REPORT_CHECKS: [&str; 10] = [
    "boundedness",
    "convergence",
    "observer-convergence",
    "lyapunov-theta-monotone",
    "lyapunov-xi-monotone",
    "l2-tail-adaptation",
    "l2-tail-embedding",
    "pe-gramian",
    "exp-rate-fit",
    "finite-form-consistency",
];

fn require_samples(traj: &Trajectory, at_least: usize) -> Result<(), Error> {
    if traj.len() < at_least {
        return Err(Error::EmptyTrajectory);
    }
    Ok(())
}

fn h_norm_sq(h: &Matrix, v: &[f64]) -> f64 {
    num::dot(v, &h.mul_vec(v).expect("H shaped d x d"))
}

/// Adaptation Lyapunov trace `V_theta(t) = |theta - theta_hat|_H^2 + eps(t)`
/// with the forward tail
/// `eps(t) = 1/2 int_t^{t_end} (kappa^2(xi) + 1) |e|^2 dtau`
/// reconstructed by trapezoidal quadrature over the logged grid.
pub fn v_theta_trace(traj: &Trajectory, models: &Models) -> Result<Vec<(f64, f64)>, Error> {
    require_samples(traj, 2)?;
    let integrand: Vec<f64> = traj
        .states
        .iter()
        .zip(&traj.derived)
        .map(|(s, d)| {
            let k = models.mode.kappa(&models.target, &s.xi);
            (k * k + 1.0) * num::dot(&d.e, &d.e)
        })
        .collect();
    let cumulative = quad::cumulative_trapezoid(&traj.times, &integrand);
    let total = *cumulative.last().unwrap();
    Ok(traj
        .states
        .iter()
        .zip(&traj.derived)
        .zip(&cumulative)
        .map(|((s, d), c)| {
            let mismatch = num::sub(&s.theta, &d.theta_hat);
            let eps = 0.5 * (total - c);
            (s.t, h_norm_sq(&models.drift.h, &mismatch) + eps)
        })
        .collect())
}

/// Observer Lyapunov trace
/// `V_xi(t) = 0.5 |x - xi|^2 + 0.5 |theta - nu|_H^2`, evaluated pointwise.
pub fn v_xi_trace(traj: &Trajectory, models: &Models) -> Result<Vec<(f64, f64)>, Error> {
    require_samples(traj, 1)?;
    Ok(traj
        .states
        .iter()
        .map(|s| {
            let dx = num::sub(&s.x, &s.xi);
            let dth = num::sub(&s.theta, &s.nu);
            (s.t, 0.5 * num::dot(&dx, &dx) + 0.5 * h_norm_sq(&models.drift.h, &dth))
        })
        .collect())
}

/// Shaping-potential trace: the definite integral of the shaping function
/// from 0 to `psi(x(t))`, by adaptive Simpson quadrature to 1e-9. The
/// proof-internal forward tail term is out of scope here.
pub fn v_psi_trace(traj: &Trajectory, models: &Models) -> Result<Vec<(f64, f64)>, Error> {
    require_samples(traj, 1)?;
    let varphi = &models.target.varphi;
    Ok(traj
        .times
        .iter()
        .zip(&traj.derived)
        .map(|(t, d)| (*t, quad::adaptive_simpson(&|s| varphi(s), 0.0, d.psi, 1e-9)))
        .collect())
}

/// Minimum eigenvalue of the sliding-window excitation Gramian
/// `int_t^{t+T} alpha(xi)^T alpha(xi) dtau` for every logged start time
/// whose window fits. Trapezoidal in time, with the window end interpolated
/// linearly between grid points.
pub fn pe_min_eig(
    traj: &Trajectory,
    models: &Models,
    window: f64,
) -> Result<Vec<(f64, f64)>, Error> {
    require_samples(traj, 3)?;
    let span = traj.span();
    if !(window > 0.0) || window > span {
        return Err(Error::WindowTooLong { window, span });
    }
    let d = models.plant.d;
    let n_samples = traj.len();

    // alpha^T alpha per sample, then entrywise cumulative trapezoid.
    let mut grams: Vec<Matrix> = Vec::with_capacity(n_samples);
    for s in &traj.states {
        let a = dynamics::alpha(&models.plant, &s.xi)?;
        grams.push(a.transpose().matmul(&a)?);
    }
    let mut cumulative: Vec<Matrix> = Vec::with_capacity(n_samples);
    cumulative.push(Matrix::zeros(d, d));
    for i in 1..n_samples {
        let dt = traj.times[i] - traj.times[i - 1];
        let seg = grams[i].add(&grams[i - 1])?.scale(0.5 * dt);
        cumulative.push(cumulative[i - 1].add(&seg)?);
    }

    let t_last = *traj.times.last().unwrap();
    let mut out = Vec::new();
    let mut j = 0usize;
    for i in 0..n_samples {
        let end = traj.times[i] + window;
        if end > t_last + 1e-12 * (1.0 + num::abs(t_last)) {
            break;
        }
        while j + 1 < n_samples && traj.times[j + 1] <= end {
            j += 1;
        }
        // Window integral = C(t_j) - C(t_i) + partial trapezoid to `end`.
        let mut g = cumulative[j].sub(&cumulative[i])?;
        if end > traj.times[j] && j + 1 < n_samples {
            let dt_grid = traj.times[j + 1] - traj.times[j];
            let frac = (end - traj.times[j]) / dt_grid;
            let m_end = grams[j].add(&grams[j + 1].sub(&grams[j])?.scale(frac))?;
            let partial = grams[j].add(&m_end)?.scale(0.5 * (end - traj.times[j]));
            g = g.add(&partial)?;
        }
        out.push((traj.times[i], linalg::sym_min_eig(&g)?));
    }
    if out.is_empty() {
        return Err(Error::WindowTooLong { window, span });
    }
    Ok(out)
}

/// A fitted exponential envelope `v(t) ~ d0 exp(-c t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub d0: f64,
    pub c: f64,
    /// RMS residual of the straight-line fit in log units.
    pub rms_log_residual: f64,
    pub usable_points: usize,
}

/// Least-squares line fit on `(t, log v)` after discarding values below
/// 1e-12. Returns the amplitude and decay rate; a positive `c` with a small
/// residual is the empirical signature of exponential convergence.
pub fn fit_exp_rate(series: &[(f64, f64)]) -> Result<RateFit, Error> {
    let pts: Vec<(f64, f64)> =
        series.iter().filter(|(_, v)| *v >= 1e-12).map(|(t, v)| (*t, num::ln(*v))).collect();
    if pts.len() < 5 {
        return Err(Error::DegenerateSeries { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let st: f64 = pts.iter().map(|(t, _)| t).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let stt: f64 = pts.iter().map(|(t, _)| t * t).sum();
    let sty: f64 = pts.iter().map(|(t, y)| t * y).sum();
    let denom = n * stt - st * st;
    if num::abs(denom) < 1e-300 {
        return Err(Error::DegenerateSeries { usable: pts.len() });
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mut ss = 0.0;
    for (t, y) in &pts {
        let r = y - (intercept + slope * t);
        ss += r * r;
    }
    Ok(RateFit {
        d0: num::exp(intercept),
        c: -slope,
        rms_log_residual: num::sqrt(ss / n),
        usable_points: pts.len(),
    })
}

/// Max-norm residual between the central-difference derivative of the
/// derived estimate and the virtual adaptation rate evaluated along the
/// trajectory with the logged embedding mismatch as its disturbance input.
///
/// Only interior samples with locally uniform spacing participate, so the
/// residual is a clean second-order quantity in the logging step.
pub fn finite_form_consistency(traj: &Trajectory, models: &Models) -> Result<f64, Error> {
    require_samples(traj, 3)?;
    let mut worst = 0.0_f64;
    for k in 1..traj.len() - 1 {
        let dt_b = traj.times[k] - traj.times[k - 1];
        let dt_f = traj.times[k + 1] - traj.times[k];
        if num::abs(dt_f - dt_b) > 1e-9 * dt_b.max(dt_f) {
            continue;
        }
        let s = &traj.states[k];
        let d = &traj.derived[k];
        let cd: Vec<f64> = traj.derived[k + 1]
            .theta_hat
            .iter()
            .zip(&traj.derived[k - 1].theta_hat)
            .map(|(a, b)| (a - b) / (dt_f + dt_b))
            .collect();
        let oracle = dynamics::virtual_rhs(
            &models.plant,
            &models.drift,
            &models.target,
            &models.mode,
            &s.xi,
            &s.theta,
            &d.theta_hat,
            &d.e,
        )?;
        worst = worst.max(num::norm(&num::sub(&cd, &oracle)));
    }
    Ok(worst)
}

/// Trapezoidal energy of a derived signal over the full span and over the
/// final `tail_fraction` of it. Selector names: `adaptation-error` for the
/// regressor-times-mismatch channel, `embedding-error` for the
/// observer-substitution channel.
pub fn l2_tail(
    traj: &Trajectory,
    signal: &str,
    tail_fraction: f64,
) -> Result<(f64, f64), Error> {
    require_samples(traj, 2)?;
    let values: Vec<f64> = match signal {
        "adaptation-error" => {
            traj.derived.iter().map(|d| num::dot(&d.adapt_err, &d.adapt_err)).collect()
        }
        "embedding-error" => traj.derived.iter().map(|d| num::dot(&d.e, &d.e)).collect(),
        other => return Err(Error::UnknownSignal { name: other.to_string() }),
    };
    let total = quad::trapezoid(&traj.times, &values);
    let t_last = *traj.times.last().unwrap();
    let t_cut = t_last - tail_fraction * traj.span();
    let mut tail = 0.0;
    for i in 1..traj.len() {
        let (t0, t1) = (traj.times[i - 1], traj.times[i]);
        if t1 <= t_cut {
            continue;
        }
        if t0 >= t_cut {
            tail += 0.5 * (values[i] + values[i - 1]) * (t1 - t0);
        } else {
            // Split the straddling interval at the cut.
            let frac = (t_cut - t0) / (t1 - t0);
            let v_cut = values[i - 1] + frac * (values[i] - values[i - 1]);
            tail += 0.5 * (values[i] + v_cut) * (t1 - t_cut);
        }
    }
    Ok((total, tail))
}

/// Names of the four swept assumption checks, in emission order.
pub const ASSUMPTION_CHECKS: [&str; 4] = [
    "drift-contraction",
    "dissipation-inequality",
    "gradient-bound",
    "target-invariance",
];

/// Sweeps the standing-assumption inequalities over low-discrepancy samples
/// of the configured region (states) and the admissible box (parameters).
///
/// Worst violators report the first occurrence in sweep order. Failures are
/// verdicts, never errors.
pub fn verify_assumptions(models: &Models, cfg: &DiagnosticsConfig) -> Verdict {
    let mut checks = Vec::new();
    checks.push(drift_contraction_check(models, cfg));
    let states = cfg.sample_region.sweep(cfg.sample_count);
    checks.push(dissipation_check(models, cfg, &states));
    checks.push(gradient_bound_check(models, cfg, &states));
    checks.push(target_invariance_check(models, cfg, &states));
    Verdict { checks }
}

fn drift_contraction_check(models: &Models, cfg: &DiagnosticsConfig) -> CheckResult {
    let mut check = CheckResult::new("drift-contraction");
    check.threshold = Some(cfg.tols.drift_eig);
    let d = models.plant.d;
    let box_region = SampleRegion {
        lo: models.drift.theta_box.iter().map(|(lo, _)| *lo).collect(),
        hi: models.drift.theta_box.iter().map(|(_, hi)| *hi).collect(),
        min_norm: 0.0,
    };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_theta = vec![0.0; d];
    for theta in box_region.sweep(cfg.sample_count) {
        let j = (models.drift.js)(&theta);
        let hj = match models.drift.h.matmul(&j) {
            Ok(m) => m,
            Err(_) => {
                check.note = Some("drift Jacobian shape mismatch".to_string());
                return check;
            }
        };
        let sym = hj.add(&hj.transpose()).expect("square by construction");
        // max eigenvalue = -(min eigenvalue of the negation)
        let max_eig = match linalg::sym_min_eig(&sym.scale(-1.0)) {
            Ok(v) => -v,
            Err(e) => {
                check.note = Some(format!("eigensolve failed: {e}"));
                return check;
            }
        };
        if max_eig > worst {
            worst = max_eig;
            worst_theta = theta;
        }
    }
    check.measured = Some(worst);
    check.pass = worst <= cfg.tols.drift_eig;
    check.worst_state = Some(worst_theta);
    check
}

fn dissipation_check(models: &Models, cfg: &DiagnosticsConfig, states: &[Vec<f64>]) -> CheckResult {
    let mut check = CheckResult::new("dissipation-inequality");
    check.threshold = Some(cfg.tols.dissipation);
    let target = &models.target;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_x: Option<Vec<f64>> = None;
    for x in states {
        let f0 = match dynamics::f_zero(&models.plant, target, x) {
            Ok(v) => v,
            Err(e) => {
                check.note = Some(format!("f0 evaluation failed: {e}"));
                return check;
            }
        };
        let psi = (target.psi)(x);
        let lhs = psi * num::dot(&(target.grad_psi)(x), &f0);
        // Violation margin of psi psi' <= -2 beta_min varphi(psi) psi.
        let margin = lhs + 2.0 * target.beta_min * (target.varphi)(psi) * psi;
        if margin > worst {
            worst = margin;
            worst_x = Some(x.clone());
        }
    }
    check.measured = Some(worst);
    check.pass = worst <= cfg.tols.dissipation;
    check.worst_state = worst_x;
    check
}

fn gradient_bound_check(
    models: &Models,
    cfg: &DiagnosticsConfig,
    states: &[Vec<f64>],
) -> CheckResult {
    let mut check = CheckResult::new("gradient-bound");
    check.threshold = Some(cfg.tols.gradient);
    let target = &models.target;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_x: Option<Vec<f64>> = None;
    for x in states {
        let margin = num::norm(&(target.grad_psi)(x)) - num::abs((target.kappa)(x));
        if margin > worst {
            worst = margin;
            worst_x = Some(x.clone());
        }
    }
    check.measured = Some(worst);
    check.pass = worst <= cfg.tols.gradient;
    check.worst_state = worst_x;
    check
}

/// Locates points of the shaped level set by bisecting the sign changes of
/// `varphi(psi(x))` along segments between consecutive sweep samples, then
/// checks the target field residual `grad_psi . f0` there.
fn target_invariance_check(
    models: &Models,
    cfg: &DiagnosticsConfig,
    states: &[Vec<f64>],
) -> CheckResult {
    let mut check = CheckResult::new("target-invariance");
    check.threshold = Some(cfg.tols.invariance);
    let target = &models.target;
    let level = |x: &[f64]| (target.varphi)((target.psi)(x));

    let mut points = Vec::new();
    for pair in states.windows(2) {
        if points.len() >= cfg.sample_count {
            break;
        }
        let (a, b) = (&pair[0], &pair[1]);
        let (mut fa, fb) = (level(a), level(b));
        if fa == 0.0 {
            points.push(a.clone());
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        let mut lo = a.clone();
        let mut hi = b.clone();
        for _ in 0..90 {
            let mid: Vec<f64> = lo.iter().zip(&hi).map(|(p, q)| 0.5 * (p + q)).collect();
            let fm = level(&mid);
            if fm == 0.0 || num::norm(&num::sub(&hi, &lo)) < 1e-14 {
                lo = mid;
                break;
            }
            if fa * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                fa = fm;
            }
        }
        points.push(lo);
    }

    if points.is_empty() {
        check.evaluated = false;
        check.note = Some("no level-set points located in the sample region".to_string());
        return check;
    }

    let mut worst = f64::NEG_INFINITY;
    let mut worst_x: Option<Vec<f64>> = None;
    for x in &points {
        let f0 = match dynamics::f_zero(&models.plant, target, x) {
            Ok(v) => v,
            Err(e) => {
                check.note = Some(format!("f0 evaluation failed: {e}"));
                return check;
            }
        };
        let resid = num::abs(num::dot(&(target.grad_psi)(x), &f0));
        if resid > worst {
            worst = resid;
            worst_x = Some(x.clone());
        }
    }
    check.measured = Some(worst);
    check.pass = worst <= cfg.tols.invariance;
    check.worst_state = worst_x;
    check.note = Some(format!("{} level-set points checked", points.len()));
    check
}

/// Builds the full run report over a completed trajectory.
pub fn report(
    traj: &Trajectory,
    models: &Models,
    cfg: &DiagnosticsConfig,
    ctx: &ReportContext<'_>,
) -> Result<Report, Error> {
    require_samples(traj, 2)?;
    let mut checks = Vec::new();

    checks.push(boundedness_check(traj, cfg));
    checks.push(convergence_check(traj, models, cfg));
    checks.push(observer_check(traj, cfg));
    checks.push(monotone_check(
        "lyapunov-theta-monotone",
        &v_theta_trace(traj, models)?,
        cfg.monotonicity_slack,
    ));
    checks.push(monotone_check(
        "lyapunov-xi-monotone",
        &v_xi_trace(traj, models)?,
        cfg.monotonicity_slack,
    ));
    checks.push(l2_check(traj, "l2-tail-adaptation", "adaptation-error", cfg)?);
    checks.push(l2_check(traj, "l2-tail-embedding", "embedding-error", cfg)?);
    checks.push(pe_check(traj, models, cfg, ctx));
    checks.push(rate_fit_check(traj, cfg, ctx));

    let mut ff = CheckResult::new("finite-form-consistency");
    ff.threshold = Some(cfg.finite_form_tol);
    let resid = finite_form_consistency(traj, models)?;
    ff.measured = Some(resid);
    ff.pass = resid <= cfg.finite_form_tol;
    checks.push(ff);

    for assumption in ctx.asserted_assumptions {
        let mut c = CheckResult::new(&format!("asserted:{assumption}"));
        c.pass = true;
        c.informational = true;
        c.note = Some("asserted by scenario author, not machine-checked".to_string());
        checks.push(c);
    }

    let verdict = Verdict { checks };
    let hard_pass = verdict.hard_pass();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        scenario: ctx.scenario_name.to_string(),
        failure: None,
        checks: verdict.checks,
        hard_pass,
    })
}

/// Report for a run that aborted: carries the failure time and marks every
/// standard check "not evaluated".
pub fn report_not_evaluated(ctx: &ReportContext<'_>, t: f64, reason: &str) -> Report {
    let mut checks = Vec::new();
    for name in REPORT_CHECKS {
        let mut c = CheckResult::new(name);
        c.evaluated = false;
        c.note = Some("not evaluated".to_string());
        checks.push(c);
    }
    Report {
        schema_version: SCHEMA_VERSION,
        scenario: ctx.scenario_name.to_string(),
        failure: Some(FailureNote { t, reason: reason.to_string() }),
        checks,
        hard_pass: false,
    }
}

fn boundedness_check(traj: &Trajectory, cfg: &DiagnosticsConfig) -> CheckResult {
    let mut check = CheckResult::new("boundedness");
    let s0 = &traj.states[0];
    let d0 = &traj.derived[0];
    let scale = [num::norm(&s0.x), num::norm(&d0.theta_hat), num::norm(&s0.xi), num::norm(&s0.nu)]
        .into_iter()
        .fold(1.0_f64, f64::max);
    let cap = cfg.bound_cap_factor * scale;
    check.threshold = Some(cap);
    let mut worst = 0.0_f64;
    let mut worst_t = traj.times[0];
    for (s, d) in traj.states.iter().zip(&traj.derived) {
        let m = [num::norm(&s.x), num::norm(&d.theta_hat), num::norm(&s.xi), num::norm(&s.nu)]
            .into_iter()
            .fold(0.0_f64, f64::max);
        if m > worst {
            worst = m;
            worst_t = s.t;
        }
    }
    check.measured = Some(worst);
    check.worst_time = Some(worst_t);
    check.pass = worst.is_finite() && worst < cap;
    check
}

fn convergence_check(traj: &Trajectory, models: &Models, cfg: &DiagnosticsConfig) -> CheckResult {
    let mut check = CheckResult::new("convergence");
    check.threshold = Some(cfg.convergence_threshold);
    let t_last = *traj.times.last().unwrap();
    let t_cut = t_last - cfg.convergence_tail_fraction * traj.span();
    let mut worst = 0.0_f64;
    let mut worst_t = t_last;
    for s in traj.states.iter().filter(|s| s.t >= t_cut) {
        let dist = models.target.dist(&s.x);
        if dist > worst {
            worst = dist;
            worst_t = s.t;
        }
    }
    check.measured = Some(worst);
    check.worst_time = Some(worst_t);
    check.pass = worst <= cfg.convergence_threshold;
    check
}

fn observer_check(traj: &Trajectory, cfg: &DiagnosticsConfig) -> CheckResult {
    let mut check = CheckResult::new("observer-convergence");
    check.threshold = Some(cfg.observer_threshold);
    let last = traj.states.last().unwrap();
    let mismatch = num::norm(&num::sub(&last.x, &last.xi));
    check.measured = Some(mismatch);
    check.worst_time = Some(last.t);
    check.pass = mismatch <= cfg.observer_threshold;
    check
}

fn monotone_check(name: &str, trace: &[(f64, f64)], slack: f64) -> CheckResult {
    let mut check = CheckResult::new(name);
    let initial = trace.first().map_or(0.0, |(_, v)| *v);
    let allowed = slack * (1.0 + initial);
    check.threshold = Some(allowed);
    let mut worst = 0.0_f64;
    let mut worst_t = trace.first().map_or(0.0, |(t, _)| *t);
    for w in trace.windows(2) {
        let rise = w[1].1 - w[0].1;
        if rise > worst {
            worst = rise;
            worst_t = w[1].0;
        }
    }
    check.measured = Some(worst);
    check.worst_time = Some(worst_t);
    check.pass = worst <= allowed;
    check
}

fn l2_check(
    traj: &Trajectory,
    name: &str,
    signal: &str,
    cfg: &DiagnosticsConfig,
) -> Result<CheckResult, Error> {
    let mut check = CheckResult::new(name);
    check.threshold = Some(cfg.l2_tail_ratio);
    let (total, tail) = l2_tail(traj, signal, cfg.l2_tail_fraction)?;
    let ratio = if total > 0.0 { tail / total } else { 0.0 };
    check.measured = Some(ratio);
    check.pass = ratio <= cfg.l2_tail_ratio;
    check.note = Some(format!("total energy {total:.6e}, tail energy {tail:.6e}"));
    Ok(check)
}

fn pe_check(
    traj: &Trajectory,
    models: &Models,
    cfg: &DiagnosticsConfig,
    ctx: &ReportContext<'_>,
) -> CheckResult {
    let mut check = CheckResult::new("pe-gramian");
    check.threshold = Some(cfg.pe_delta);
    check.informational = !ctx.expect_pe;
    if let Some(n) = ctx.pe_note {
        check.note = Some(format!("expected: {n}"));
    }
    let t_cut = traj.times[0] + cfg.pe_transient_fraction * traj.span();
    match pe_min_eig(traj, models, cfg.pe_window) {
        Ok(series) => {
            let mut inf = f64::INFINITY;
            let mut worst_t = t_cut;
            let mut any = false;
            for (t, v) in series.iter().filter(|(t, _)| *t >= t_cut) {
                any = true;
                if *v < inf {
                    inf = *v;
                    worst_t = *t;
                }
            }
            if !any {
                check.evaluated = false;
                check.note = Some("no excitation window fits after the transient".to_string());
                return check;
            }
            check.measured = Some(inf);
            check.worst_time = Some(worst_t);
            check.pass = inf >= cfg.pe_delta;
        }
        Err(e) => {
            check.evaluated = false;
            check.note = Some(format!("not evaluated: {e}"));
        }
    }
    check
}

/// Largest sample per uniform time bin, tagged with the bin midpoint.
fn bin_maxima(series: &[(f64, f64)], bins: usize) -> Vec<(f64, f64)> {
    if series.len() <= bins {
        return series.to_vec();
    }
    let t0 = series[0].0;
    let t1 = series[series.len() - 1].0;
    let width = (t1 - t0) / bins as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(bins);
    let mut idx = 0usize;
    for b in 0..bins {
        let end = if b + 1 == bins { f64::INFINITY } else { t0 + (b + 1) as f64 * width };
        let mut best: Option<f64> = None;
        while idx < series.len() && series[idx].0 < end {
            best = Some(best.map_or(series[idx].1, |m: f64| m.max(series[idx].1)));
            idx += 1;
        }
        if let Some(v) = best {
            out.push((t0 + (b as f64 + 0.5) * width, v));
        }
    }
    out
}

fn rate_fit_check(
    traj: &Trajectory,
    cfg: &DiagnosticsConfig,
    ctx: &ReportContext<'_>,
) -> CheckResult {
    let mut check = CheckResult::new("exp-rate-fit");
    check.informational = !ctx.expect_pe;
    check.threshold = Some(cfg.rate_fit_residual_max);
    let t_cut = traj.times[0] + cfg.pe_transient_fraction * traj.span();
    let series: Vec<(f64, f64)> = traj
        .states
        .iter()
        .zip(&traj.derived)
        .filter(|(s, _)| s.t >= t_cut)
        .map(|(s, d)| (s.t, num::norm(&num::sub(&s.theta, &d.theta_hat))))
        .collect();

    // The exponential claim is an envelope bound, and the raw mismatch norm
    // dips toward zero whenever the rotating error crosses the regressor's
    // null direction; fitting those log-scale spikes would drown the slope.
    // Reduce to per-bin maxima first.
    let envelope = bin_maxima(&series, 64);
    // The decay also bottoms out at the integration noise floor. Truncate
    // at the first point within a decade of the minimum, falling back to
    // the whole envelope when that leaves too little.
    let vmin = envelope.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let floor = (10.0 * vmin).max(1e-12);
    let cut = envelope.iter().position(|(_, v)| *v < floor).unwrap_or(envelope.len());
    let fitted = if cut >= 5 { &envelope[..cut] } else { &envelope[..] };

    match fit_exp_rate(fitted) {
        Ok(fit) => {
            check.measured = Some(fit.c);
            check.pass = fit.c > 0.0 && fit.rms_log_residual <= cfg.rate_fit_residual_max;
            let extra = format!(
                "d0 {:.3e}, rms log residual {:.3}, {} points",
                fit.d0, fit.rms_log_residual, fit.usable_points
            );
            check.note = Some(match check.note.take() {
                Some(prev) => format!("{prev}; {extra}"),
                None => extra,
            });
        }
        Err(e) => {
            check.evaluated = false;
            let extra = format!("not evaluated: {e}");
            check.note = Some(match check.note.take() {
                Some(prev) => format!("{prev}; {extra}"),
                None => extra,
            });
        }
    }
    check
}
