//! Time integration of the closed loop: fixed-step classical Runge-Kutta
//! (order 4) and a step-doubling adaptive variant, logging a [`Trajectory`].
//!
//! Step doubling (Richardson comparison of one `h` step against two `h/2`
//! steps) was chosen over an embedded pair: it is simpler to verify and
//! entirely adequate at the problem sizes this crate targets. A NaN guard
//! runs at every stage; global existence of solutions is an analytical
//! assumption the artifact must not rely on.

use alloc::vec::Vec;

use crate::dynamics::{self, LoopEval};
use crate::error::Error;
use crate::model::{Models, SimState};
use crate::num;

/// Step-size selection for [`integrate`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum StepMethod {
    /// Classical RK4 with a fixed step `h`.
    Fixed { h: f64 },
    /// Step-doubling error control on the full state with per-component
    /// scale `tol_abs + tol_rel * |component|`.
    Adaptive { h_init: f64, tol_rel: f64, tol_abs: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegrationConfig {
    pub t0: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub method: StepMethod,
    /// Log every `log_stride`-th accepted step (plus the final time).
    pub log_stride: usize,
    pub max_steps: usize,
}

impl IntegrationConfig {
    pub fn fixed(t0: f64, t_end: f64, h: f64) -> Self {
        IntegrationConfig {
            t0,
            t_end,
            method: StepMethod::Fixed { h },
            log_stride: 1,
            max_steps: 50_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |field, message: alloc::string::String| {
            Err(Error::InvalidConfig { field, message })
        };
        if !(self.t_end > self.t0) {
            return bad("integration.t_end", alloc::format!("{} must exceed t0 {}", self.t_end, self.t0));
        }
        match &self.method {
            StepMethod::Fixed { h } => {
                if !(*h > 0.0) {
                    return bad("integration.h", alloc::format!("step {h} must be positive"));
                }
            }
            StepMethod::Adaptive { h_init, tol_rel, tol_abs } => {
                if !(*h_init > 0.0) {
                    return bad("integration.h_init", alloc::format!("{h_init} must be positive"));
                }
                if !(*tol_rel > 0.0) || !(*tol_abs > 0.0) {
                    return bad(
                        "integration.tolerances",
                        alloc::format!("tol_rel {tol_rel} and tol_abs {tol_abs} must be positive"),
                    );
                }
            }
        }
        if self.log_stride == 0 {
            return bad("integration.log_stride", "must be at least 1".into());
        }
        if self.max_steps == 0 {
            return bad("integration.max_steps", "must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-sample derived signals logged alongside the raw state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub theta_hat: Vec<f64>,
    pub u: Vec<f64>,
    /// Embedding mismatch `e = (alpha(x) - alpha(xi)) theta`.
    pub e: Vec<f64>,
    /// Adaptation error channel `alpha(xi)(theta - theta_hat)`.
    pub adapt_err: Vec<f64>,
    pub grad_psi: Vec<f64>,
    pub psi: f64,
    pub varphi_psi: f64,
}

/// Time-indexed log of states plus derived signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SimState>,
    pub derived: Vec<Derived>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[self.times.len() - 1] - self.times[0]
        }
    }
}

/// Computes the derived record for a state (used at log time and when
/// rebuilding trajectories from stored samples).
pub fn derive(models: &Models, s: &SimState) -> Result<Derived, Error> {
    let (_, eval) = dynamics::closed_loop_eval(models, s)?;
    Ok(derived_from_eval(models, s, eval))
}

fn derived_from_eval(models: &Models, s: &SimState, eval: LoopEval) -> Derived {
    let psi = (models.target.psi)(&s.x);
    Derived {
        theta_hat: eval.theta_hat,
        u: eval.u,
        e: eval.e,
        adapt_err: eval.adapt_err,
        grad_psi: (models.target.grad_psi)(&s.x),
        psi,
        varphi_psi: (models.target.varphi)(psi),
    }
}

/// One classical 4-stage Runge-Kutta step. Any non-finite stage aborts with
/// the state's time rather than letting NaN propagate.
pub fn step_rk4<F>(rhs: F, s: &SimState, h: f64) -> Result<SimState, Error>
where
    F: Fn(&SimState) -> Result<SimState, Error>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig {
            field: "step_rk4.h",
            message: alloc::format!("step {h} must be positive"),
        });
    }
    if !s.is_finite() {
        return Err(Error::NonFiniteState { t: s.t });
    }
    // Non-finite values can surface deep inside model evaluation where no
    // meaningful time is known; stamp the step's own time on the way out.
    let eval = |stage: &SimState| {
        rhs(stage).map_err(|e| match e {
            Error::NonFiniteState { t } if !t.is_finite() => Error::NonFiniteState { t: s.t },
            other => other,
        })
    };
    let k1 = eval(s)?;
    let k2 = eval(&s.axpy(0.5 * h, &k1))?;
    let k3 = eval(&s.axpy(0.5 * h, &k2))?;
    let k4 = eval(&s.axpy(h, &k3))?;
    let mut combined = k1;
    combined = combined.axpy(2.0, &k2);
    combined = combined.axpy(2.0, &k3);
    combined = combined.axpy(1.0, &k4);
    let next = s.axpy(h / 6.0, &combined);
    if !next.is_finite() {
        return Err(Error::NonFiniteState { t: s.t });
    }
    Ok(next)
}

struct Logger<'a> {
    models: &'a Models,
    stride: usize,
    accepted: usize,
    traj: Trajectory,
}

impl<'a> Logger<'a> {
    fn new(models: &'a Models, stride: usize) -> Self {
        Logger {
            models,
            stride,
            accepted: 0,
            traj: Trajectory { times: Vec::new(), states: Vec::new(), derived: Vec::new() },
        }
    }

    fn push(&mut self, s: &SimState) -> Result<(), Error> {
        self.traj.times.push(s.t);
        self.traj.states.push(s.clone());
        self.traj.derived.push(derive(self.models, s)?);
        Ok(())
    }

    fn log_initial(&mut self, s: &SimState) -> Result<(), Error> {
        self.push(s)
    }

    fn log_accepted(&mut self, s: &SimState) -> Result<(), Error> {
        self.accepted += 1;
        if self.accepted % self.stride == 0 {
            self.push(s)?;
        }
        Ok(())
    }

    fn log_final(&mut self, s: &SimState) -> Result<(), Error> {
        if self.traj.times.last().copied() != Some(s.t) {
            self.push(s)?;
        }
        Ok(())
    }
}

/// Advances the closed loop from `s0` over `[t0, t_end]`, logging every
/// `log_stride`-th accepted step plus the final time.
pub fn integrate(models: &Models, s0: &SimState, cfg: &IntegrationConfig) -> Result<Trajectory, Error> {
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(Error::NonFiniteState { t: s0.t });
    }
    models.drift.theta_inside_box(&s0.theta)?;

    let rhs = |s: &SimState| dynamics::closed_loop_rhs(models, s);
    let mut s = s0.clone();
    s.t = cfg.t0;
    let mut logger = Logger::new(models, cfg.log_stride);
    // Deep model evaluation cannot know the simulation time when it trips
    // over a non-finite value; re-stamp such errors with the current time.
    let stamp = |e: Error, t: f64| match e {
        Error::NonFiniteState { t: bad } if !bad.is_finite() => Error::NonFiniteState { t },
        other => other,
    };
    logger.log_initial(&s).map_err(|e| stamp(e, s.t))?;

    match cfg.method {
        StepMethod::Fixed { h } => {
            let steps = num::floor((cfg.t_end - cfg.t0) / h + 1e-9) as usize;
            if steps > cfg.max_steps {
                return Err(Error::MaxStepsExceeded { t: cfg.t0, max_steps: cfg.max_steps });
            }
            for k in 0..steps {
                s = step_rk4(rhs, &s, h)?;
                // Keep the grid exact: t = t0 + (k+1) h, immune to drift.
                s.t = cfg.t0 + (k + 1) as f64 * h;
                logger.log_accepted(&s).map_err(|e| stamp(e, s.t))?;
            }
            let remainder = cfg.t_end - s.t;
            if remainder > 1e-12 * (1.0 + num::abs(cfg.t_end)) {
                s = step_rk4(rhs, &s, remainder)?;
                s.t = cfg.t_end;
            }
            logger.log_final(&s).map_err(|e| stamp(e, s.t))?;
        }
        StepMethod::Adaptive { h_init, tol_rel, tol_abs } => {
            let mut h = h_init.min(cfg.t_end - cfg.t0);
            let mut attempts = 0usize;
            while s.t < cfg.t_end - 1e-12 * (1.0 + num::abs(cfg.t_end)) {
                attempts += 1;
                if attempts > cfg.max_steps {
                    return Err(Error::MaxStepsExceeded { t: s.t, max_steps: cfg.max_steps });
                }
                h = h.min(cfg.t_end - s.t);
                let full = step_rk4(rhs, &s, h)?;
                let half = step_rk4(rhs, &s, 0.5 * h)?;
                let two_half = step_rk4(rhs, &half, 0.5 * h)?;

                // Richardson: the two-half-step solution has error ~ diff/15.
                let a = full.components();
                let b = two_half.components();
                let base = s.components();
                let mut err = 0.0_f64;
                for i in 0..a.len() {
                    let scale = tol_abs + tol_rel * num::abs(base[i]).max(num::abs(b[i]));
                    err = err.max(num::abs(b[i] - a[i]) / (15.0 * scale));
                }
                if err <= 1.0 {
                    s = two_half;
                    logger.log_accepted(&s).map_err(|e| stamp(e, s.t))?;
                }
                // Fifth-root step update (local order 5), clamped to [0.2, 5].
                let update = if err > 0.0 {
                    0.9 * libm::pow(1.0 / err, 0.2)
                } else {
                    5.0
                };
                h *= update.clamp(0.2, 5.0);
            }
            logger.log_final(&s)?;
        }
    }
    Ok(logger.traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{ControllerMode, DriftModel, PlantModel, TargetSpec};
    use alloc::boxed::Box;
    use alloc::vec;

    /// Plant x' = c x realized through f, with everything else inert.
    fn linear_models(c: f64) -> Models {
        let plant = PlantModel::new(
            1,
            1,
            1,
            Box::new(move |x: &[f64]| vec![c * x[0]]),
            Matrix::zeros(1, 1),
            Box::new(|_: &[f64]| Matrix::zeros(1, 1)),
            Box::new(|_: &[f64], _: &[f64]| vec![0.0]),
            None,
        )
        .unwrap();
        let drift = DriftModel::new(
            1,
            Box::new(|t: &[f64]| vec![0.0; t.len()]),
            Box::new(|_: &[f64]| Matrix::zeros(1, 1)),
            Matrix::identity(1),
            vec![(-10.0, 10.0)],
        )
        .unwrap();
        let target = TargetSpec {
            u0: Box::new(|_: &[f64]| vec![0.0]),
            psi: Box::new(|x: &[f64]| x[0]),
            grad_psi: Box::new(|_: &[f64]| vec![1.0]),
            varphi: Box::new(|s| s),
            kappa: Box::new(|_: &[f64]| 0.0),
            dkappa: Some(Box::new(|_: &[f64], _: &[f64]| 0.0)),
            beta_min: 0.5,
            dist_to_target: None,
        };
        Models { plant, drift, target, mode: ControllerMode::theorem1() }
    }

    fn state(x: f64) -> SimState {
        SimState::new(0.0, vec![x], vec![0.0], vec![0.0], vec![x], vec![0.0])
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let s = state(1.5);
        let zero = |s: &SimState| {
            let mut r = s.clone();
            r.t = 1.0;
            r.x = vec![0.0];
            r.theta = vec![0.0];
            r.theta_hat_i = vec![0.0];
            r.xi = vec![0.0];
            r.nu = vec![0.0];
            r.eps0 = 0.0;
            r.eps1 = 0.0;
            r.eps2 = 0.0;
            Ok(r)
        };
        let next = step_rk4(zero, &s, 0.1).unwrap();
        assert_eq!(next.x, s.x);
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn decay_step_matches_exponential() {
        let models = linear_models(-1.0);
        let rhs = |s: &SimState| dynamics::closed_loop_rhs(&models, s);
        let next = step_rk4(rhs, &state(1.0), 0.1).unwrap();
        assert!((next.x[0] - crate::num::exp(-0.1)).abs() < 1e-7, "{}", next.x[0]);
    }

    #[test]
    fn single_step_growth_order_four() {
        // y' = y, error vs e^{h} shrinks ~16x when h halves.
        let models = linear_models(1.0);
        let rhs = |s: &SimState| dynamics::closed_loop_rhs(&models, s);
        let err = |h: f64| {
            let next = step_rk4(rhs, &state(1.0), h).unwrap();
            (next.x[0] - crate::num::exp(h)).abs()
        };
        let ratio = err(0.5) / err(0.25);
        assert!(
            (8.0..64.0).contains(&ratio),
            "local order-5 ratio should be ~32, got {ratio}"
        );
    }

    #[test]
    fn global_order_four_on_linear_system() {
        let models = linear_models(-1.0);
        let err = |h: f64| {
            let cfg = IntegrationConfig::fixed(0.0, 1.0, h);
            let traj = integrate(&models, &state(1.0), &cfg).unwrap();
            (traj.states.last().unwrap().x[0] - crate::num::exp(-1.0)).abs()
        };
        let r1 = err(0.1) / err(0.05);
        let r2 = err(0.05) / err(0.025);
        assert!((8.0..32.0).contains(&r1), "ratio {r1}");
        assert!((8.0..32.0).contains(&r2), "ratio {r2}");
    }

    #[test]
    fn constant_trajectory_under_zero_dynamics() {
        let models = linear_models(0.0);
        let cfg = IntegrationConfig::fixed(0.0, 1.0, 0.1);
        let traj = integrate(&models, &state(2.0), &cfg).unwrap();
        assert!(traj.states.iter().all(|s| s.x[0] == 2.0));
        assert_eq!(traj.len(), 11); // t0 plus 10 steps; final sample dedups
    }

    #[test]
    fn deterministic_trajectories() {
        let models = linear_models(-0.5);
        let cfg = IntegrationConfig::fixed(0.0, 2.0, 0.01);
        let a = integrate(&models, &state(1.0), &cfg).unwrap();
        let b = integrate(&models, &state(1.0), &cfg).unwrap();
        assert_eq!(a.times.len(), b.times.len());
        for i in 0..a.times.len() {
            assert_eq!(a.times[i].to_bits(), b.times[i].to_bits());
            assert_eq!(a.states[i].x[0].to_bits(), b.states[i].x[0].to_bits());
        }
    }

    #[test]
    fn times_strictly_increasing_and_lengths_agree() {
        let models = linear_models(-1.0);
        let mut cfg = IntegrationConfig::fixed(0.0, 1.0, 0.01);
        cfg.log_stride = 7;
        let traj = integrate(&models, &state(1.0), &cfg).unwrap();
        assert_eq!(traj.times.len(), traj.states.len());
        assert_eq!(traj.times.len(), traj.derived.len());
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*traj.times.last().unwrap(), 1.0);
    }

    #[test]
    fn adaptive_meets_tolerance() {
        let models = linear_models(-1.0);
        let cfg = IntegrationConfig {
            t0: 0.0,
            t_end: 1.0,
            method: StepMethod::Adaptive { h_init: 0.5, tol_rel: 1e-9, tol_abs: 1e-12 },
            log_stride: 1,
            max_steps: 100_000,
        };
        let traj = integrate(&models, &state(1.0), &cfg).unwrap();
        let end = traj.states.last().unwrap();
        assert!((end.t - 1.0).abs() < 1e-9);
        assert!((end.x[0] - crate::num::exp(-1.0)).abs() < 1e-8);
    }

    #[test]
    fn max_steps_exceeded_reported() {
        let models = linear_models(-1.0);
        let mut cfg = IntegrationConfig::fixed(0.0, 1.0, 1e-6);
        cfg.max_steps = 10;
        assert!(matches!(
            integrate(&models, &state(1.0), &cfg),
            Err(Error::MaxStepsExceeded { .. })
        ));
    }

    #[test]
    fn non_finite_initial_rejected() {
        let models = linear_models(-1.0);
        let cfg = IntegrationConfig::fixed(0.0, 1.0, 0.1);
        let mut s = state(1.0);
        s.x[0] = f64::NAN;
        assert!(matches!(integrate(&models, &s, &cfg), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn blowup_reports_failure_time() {
        // x' = x^2 from x(0) = 1 blows up at t = 1.
        let plant = PlantModel::new(
            1,
            1,
            1,
            Box::new(|x: &[f64]| vec![x[0] * x[0]]),
            Matrix::zeros(1, 1),
            Box::new(|_: &[f64]| Matrix::zeros(1, 1)),
            Box::new(|_: &[f64], _: &[f64]| vec![0.0]),
            None,
        )
        .unwrap();
        let base = linear_models(0.0);
        let models = Models { plant, drift: base.drift, target: base.target, mode: base.mode };
        let cfg = IntegrationConfig::fixed(0.0, 2.0, 0.01);
        match integrate(&models, &state(1.0), &cfg) {
            Err(Error::NonFiniteState { t }) => {
                assert!(t > 0.5 && t < 1.5, "failure near the blowup, got {t}");
            }
            other => panic!("expected NonFiniteState, got {other:?}"),
        }
    }

    #[test]
    fn theta_outside_box_rejected() {
        let models = linear_models(-1.0);
        let cfg = IntegrationConfig::fixed(0.0, 1.0, 0.1);
        let mut s = state(1.0);
        s.theta = vec![99.0];
        assert!(matches!(
            integrate(&models, &s, &cfg),
            Err(Error::OutsideThetaBox { .. })
        ));
    }

    #[test]
    fn eps_accumulators_nondecreasing() {
        let models = linear_models(-1.0);
        let cfg = IntegrationConfig::fixed(0.0, 1.0, 0.01);
        let traj = integrate(&models, &state(1.0), &cfg).unwrap();
        for w in traj.states.windows(2) {
            assert!(w[1].eps0 >= w[0].eps0);
            assert!(w[1].eps1 >= w[0].eps1);
            assert!(w[1].eps2 >= w[0].eps2);
        }
    }
}
