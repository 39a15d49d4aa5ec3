//! Right-hand sides of the closed loop: the regressor coupling, the
//! finite-form adaptation law, the embedding observer, the virtual
//! adaptation oracle, and the assembled combined system.
//!
//! The finite form keeps the parameter estimate as algebra over measurable
//! quantities, `theta_hat = H^{-1} Psi(xi) x + theta_hat_I`, so only the
//! integral part is a state. Differentiating that algebra along the flow
//! reproduces the virtual algorithm; `virtual_rhs` exists so diagnostics can
//! check exactly that and is never used inside the loop (it reads the
//! unknown `theta`).

use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::{self, Matrix};
use crate::model::{ControllerMode, DriftModel, Models, PlantModel, SimState, TargetSpec};
use crate::num;

/// Regressor coupling `alpha(xi) = Gu * phi(xi)`, shaped `n x d`.
pub fn alpha(plant: &PlantModel, xi: &[f64]) -> Result<Matrix, Error> {
    if xi.len() != plant.n {
        return Err(Error::DimensionMismatch { context: "alpha" });
    }
    plant.gu.matmul(&(plant.phi)(xi))
}

/// Adaptation gain matrix `Psi(xi) = (kappa^2(xi) + 1) alpha(xi)^T`,
/// shaped `d x n`. The gain factor is exactly 1 in kappa-zero mode.
pub fn big_psi(
    plant: &PlantModel,
    target: &TargetSpec,
    mode: &ControllerMode,
    xi: &[f64],
) -> Result<Matrix, Error> {
    let k = mode.kappa(target, xi);
    let gain = k * k + 1.0;
    Ok(alpha(plant, xi)?.transpose().scale(gain))
}

/// Finite-form parameter estimate
/// `theta_hat = H^{-1} Psi(xi) x + theta_hat_I`.
pub fn theta_hat(
    plant: &PlantModel,
    drift: &DriftModel,
    target: &TargetSpec,
    mode: &ControllerMode,
    x: &[f64],
    xi: &[f64],
    theta_hat_i: &[f64],
) -> Result<Vec<f64>, Error> {
    if x.len() != plant.n || theta_hat_i.len() != plant.d {
        return Err(Error::DimensionMismatch { context: "theta_hat" });
    }
    let psi_x = big_psi(plant, target, mode, xi)?.mul_vec(x)?;
    let h_inv_psi_x = linalg::spd_solve_vec(&drift.h, &psi_x)?;
    Ok(num::axpy(theta_hat_i, 1.0, &h_inv_psi_x))
}

/// Control input `u = u0(x) - phi(xi) theta_hat`.
pub fn control_u(
    plant: &PlantModel,
    target: &TargetSpec,
    x: &[f64],
    xi: &[f64],
    theta_hat: &[f64],
) -> Result<Vec<f64>, Error> {
    if x.len() != plant.n || xi.len() != plant.n || theta_hat.len() != plant.d {
        return Err(Error::DimensionMismatch { context: "control_u" });
    }
    let ff = (plant.phi)(xi).mul_vec(theta_hat)?;
    Ok(num::axpy(&(target.u0)(x), -1.0, &ff))
}

/// Directional derivative of the gain matrix, `D Psi(xi)[v]`.
///
/// Uses the analytic `dphi`/`dkappa` when the model supplies everything the
/// product rule needs; otherwise falls back to central finite differences
/// with step `fd_step_scale * (1 + |xi|) * cbrt(machine eps)` along the unit
/// direction, scaled back by `|v|`.
pub fn d_big_psi(
    plant: &PlantModel,
    target: &TargetSpec,
    mode: &ControllerMode,
    xi: &[f64],
    v: &[f64],
) -> Result<Matrix, Error> {
    if xi.len() != plant.n || v.len() != plant.n {
        return Err(Error::DimensionMismatch { context: "d_big_psi" });
    }
    if !num::all_finite(v) {
        return Err(Error::NonFiniteState { t: f64::NAN });
    }
    let vnorm = num::norm(v);
    if vnorm == 0.0 {
        return Ok(Matrix::zeros(plant.d, plant.n));
    }

    let kappa_zero = matches!(mode.variant, crate::model::ControllerVariant::Theorem2KappaZero);
    let have_analytic = plant.dphi.is_some() && (kappa_zero || target.dkappa.is_some());
    if have_analytic {
        let dphi = plant.dphi.as_ref().unwrap();
        let k = mode.kappa(target, xi);
        let gain = k * k + 1.0;
        // (kappa^2 + 1) (Gu dphi[v])^T
        let mut out = plant.gu.matmul(&dphi(xi, v))?.transpose().scale(gain);
        if !kappa_zero {
            // + 2 kappa dkappa[v] (Gu phi(xi))^T
            let dk = (target.dkappa.as_ref().unwrap())(xi, v);
            let lead = alpha(plant, xi)?.transpose().scale(2.0 * k * dk);
            out = out.add(&lead)?;
        }
        return Ok(out);
    }

    let h = mode.fd_step_scale * (1.0 + num::norm(xi)) * num::cbrt_eps();
    let unit: Vec<f64> = v.iter().map(|c| c / vnorm).collect();
    let plus = big_psi(plant, target, mode, &num::axpy(xi, h, &unit))?;
    let minus = big_psi(plant, target, mode, &num::axpy(xi, -h, &unit))?;
    Ok(plus.sub(&minus)?.scale(vnorm / (2.0 * h)))
}

/// Observer rates: state copy `xi` with injection gain built from the
/// regressor row moduli, and the drifting estimate `nu`.
///
/// `xi' = f(x) + Gu u + lambda(x, xi)(x - xi) + Gu phi(x) nu`,
/// `nu' = S(nu) + H^{-1} (Gu phi(x))^T (x - xi)`, with
/// `lambda = 1 + sum_i lambda_i^2 (1 + kappa^2(xi))`.
pub fn observer_rhs(
    plant: &PlantModel,
    drift: &DriftModel,
    target: &TargetSpec,
    mode: &ControllerMode,
    x: &[f64],
    xi: &[f64],
    nu: &[f64],
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    if x.len() != plant.n || xi.len() != plant.n || nu.len() != plant.d || u.len() != plant.m {
        return Err(Error::DimensionMismatch { context: "observer_rhs" });
    }
    let k = mode.kappa(target, xi);
    let moduli = (plant.phi_row_lipschitz)(x, xi);
    if moduli.len() != plant.m {
        return Err(Error::DimensionMismatch { context: "observer_rhs moduli" });
    }
    let lambda =
        1.0 + moduli.iter().map(|l| l * l).sum::<f64>() * (1.0 + k * k);

    let alpha_x = alpha(plant, x)?;
    let x_minus_xi = num::sub(x, xi);

    let mut xi_rate = (plant.f)(x);
    if xi_rate.len() != plant.n {
        return Err(Error::DimensionMismatch { context: "observer_rhs f" });
    }
    xi_rate = num::axpy(&xi_rate, 1.0, &plant.gu.mul_vec(u)?);
    xi_rate = num::axpy(&xi_rate, lambda, &x_minus_xi);
    xi_rate = num::axpy(&xi_rate, 1.0, &alpha_x.mul_vec(nu)?);

    let injection = alpha_x.transpose().mul_vec(&x_minus_xi)?;
    let nu_rate =
        num::axpy(&(drift.s)(nu), 1.0, &linalg::spd_solve_vec(&drift.h, &injection)?);

    Ok((xi_rate, nu_rate))
}

/// Integral-part rate of the finite form:
/// `theta_hat_I' = S(theta_hat) - H^{-1} DPsi(xi)[f_xi] x - H^{-1} Psi(xi) f0(x)`
/// with `f0(x) = f(x) + Gu u0(x)` and `f_xi` the observer state rate.
pub fn theta_hat_i_rhs(
    plant: &PlantModel,
    drift: &DriftModel,
    target: &TargetSpec,
    mode: &ControllerMode,
    x: &[f64],
    xi: &[f64],
    nu: &[f64],
    theta_hat_i: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, Error> {
    let est = theta_hat(plant, drift, target, mode, x, xi, theta_hat_i)?;
    let (f_xi, _) = observer_rhs(plant, drift, target, mode, x, xi, nu, u)?;
    let dpsi_fxi_x = d_big_psi(plant, target, mode, xi, &f_xi)?.mul_vec(x)?;
    let f0 = f_zero(plant, target, x)?;
    let psi_f0 = big_psi(plant, target, mode, xi)?.mul_vec(&f0)?;

    let mut rate = (drift.s)(&est);
    rate = num::axpy(&rate, -1.0, &linalg::spd_solve_vec(&drift.h, &dpsi_fxi_x)?);
    rate = num::axpy(&rate, -1.0, &linalg::spd_solve_vec(&drift.h, &psi_f0)?);
    Ok(rate)
}

/// Unperturbed target field `f0(x) = f(x) + Gu u0(x)`, true by construction
/// rather than stored, so the feasibility identity cannot be violated by a
/// stale copy.
pub fn f_zero(plant: &PlantModel, target: &TargetSpec, x: &[f64]) -> Result<Vec<f64>, Error> {
    if x.len() != plant.n {
        return Err(Error::DimensionMismatch { context: "f_zero" });
    }
    let u0 = (target.u0)(x);
    if u0.len() != plant.m {
        return Err(Error::DimensionMismatch { context: "f_zero u0" });
    }
    Ok(num::axpy(&(plant.f)(x), 1.0, &plant.gu.mul_vec(&u0)?))
}

/// Virtual adaptation algorithm rate,
/// `S(theta_hat) + H^{-1}(kappa^2(xi)+1) alpha(xi)^T (alpha(xi)(theta - theta_hat) + eps)`.
///
/// Diagnostics-only oracle: it reads the unknown `theta`, so the closed loop
/// never calls it.
pub fn virtual_rhs(
    plant: &PlantModel,
    drift: &DriftModel,
    target: &TargetSpec,
    mode: &ControllerMode,
    xi: &[f64],
    theta: &[f64],
    theta_hat: &[f64],
    eps_input: &[f64],
) -> Result<Vec<f64>, Error> {
    if theta.len() != plant.d || theta_hat.len() != plant.d || eps_input.len() != plant.n {
        return Err(Error::DimensionMismatch { context: "virtual_rhs" });
    }
    let k = mode.kappa(target, xi);
    let gain = k * k + 1.0;
    let a = alpha(plant, xi)?;
    let mismatch = a.mul_vec(&num::sub(theta, theta_hat))?;
    let driven = num::axpy(&mismatch, 1.0, eps_input);
    let update = a.transpose().mul_vec(&driven)?;
    let h_inv = linalg::spd_solve_vec(&drift.h, &update)?;
    Ok(num::axpy(&(drift.s)(theta_hat), 1.0, &h_inv.iter().map(|v| gain * v).collect::<Vec<_>>()))
}

/// Per-evaluation byproducts of the combined system worth keeping.
pub struct LoopEval {
    pub theta_hat: Vec<f64>,
    pub u: Vec<f64>,
    /// Embedding mismatch `e = (alpha(x) - alpha(xi)) theta`.
    pub e: Vec<f64>,
    /// Adaptation error channel `alpha(xi)(theta - theta_hat)`.
    pub adapt_err: Vec<f64>,
}

/// Combined closed-loop rate over the full [`SimState`].
///
/// Assembles plant, drift, finite-form integral part, observer, and the
/// three bookkeeping error integrals (accumulated as squared magnitudes, so
/// they are nondecreasing). In kappa-zero mode the gradient-weighted channel
/// `eps0` is held at zero; that route does not use it.
pub fn closed_loop_rhs(models: &Models, s: &SimState) -> Result<SimState, Error> {
    let (rate, _) = closed_loop_eval(models, s)?;
    Ok(rate)
}

/// Same as [`closed_loop_rhs`] but also returns the derived signals.
pub fn closed_loop_eval(models: &Models, s: &SimState) -> Result<(SimState, LoopEval), Error> {
    let Models { plant, drift, target, mode } = models;
    if !s.dims_match(plant.n, plant.d) {
        return Err(Error::DimensionMismatch { context: "closed_loop_rhs" });
    }
    if !s.is_finite() {
        return Err(Error::NonFiniteState { t: s.t });
    }

    let est = theta_hat(plant, drift, target, mode, &s.x, &s.xi, &s.theta_hat_i)?;
    let u = control_u(plant, target, &s.x, &s.xi, &est)?;

    // x' = f(x) + Gu (phi(x) theta + u)
    let drive = num::axpy(&(plant.phi)(&s.x).mul_vec(&s.theta)?, 1.0, &u);
    let x_rate = num::axpy(&(plant.f)(&s.x), 1.0, &plant.gu.mul_vec(&drive)?);

    let theta_rate = (drift.s)(&s.theta);
    let theta_hat_i_rate =
        theta_hat_i_rhs(plant, drift, target, mode, &s.x, &s.xi, &s.nu, &s.theta_hat_i, &u)?;
    let (xi_rate, nu_rate) =
        observer_rhs(plant, drift, target, mode, &s.x, &s.xi, &s.nu, &u)?;

    let alpha_x = alpha(plant, &s.x)?;
    let alpha_xi = alpha(plant, &s.xi)?;
    let e = alpha_x.sub(&alpha_xi)?.mul_vec(&s.theta)?;
    let adapt_err = alpha_xi.mul_vec(&num::sub(&s.theta, &est))?;

    let eps0_rate = match mode.variant {
        crate::model::ControllerVariant::Theorem2KappaZero => 0.0,
        crate::model::ControllerVariant::Theorem1 => {
            let g = (target.grad_psi)(&s.x);
            let channel = num::dot(&g, &num::axpy(&adapt_err, 1.0, &e));
            channel * channel
        }
    };
    let eps1_rate = num::dot(&e, &e);
    let eps2_rate = num::dot(&adapt_err, &adapt_err);

    let rate = SimState {
        t: 1.0,
        x: x_rate,
        theta: theta_rate,
        theta_hat_i: theta_hat_i_rate,
        xi: xi_rate,
        nu: nu_rate,
        eps0: eps0_rate,
        eps1: eps1_rate,
        eps2: eps2_rate,
    };
    if !rate.is_finite() {
        return Err(Error::NonFiniteState { t: s.t });
    }
    Ok((rate, LoopEval { theta_hat: est, u, e, adapt_err }))
}
