//! Model definitions: the controlled plant, the parameter drift, the
//! regulation target, and the concatenated simulation state.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::{self, Matrix};
use crate::num;

/// Map from a state vector to a vector (dimensions fixed by the owner).
pub type VectorMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Map from a state vector to a matrix.
pub type MatrixMap = Box<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
/// Map from a pair of state vectors to a vector (Lipschitz moduli).
pub type PairMap = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// Map from a state vector to a scalar.
pub type ScalarMap = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Scalar function of one real variable.
pub type ScalarFun = Box<dyn Fn(f64) -> f64 + Send + Sync>;
/// Directional derivative of a matrix map: `(point, direction) -> matrix`.
pub type DirectionalMatrixMap = Box<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>;
/// Directional derivative of a scalar map: `(point, direction) -> scalar`.
pub type DirectionalScalarMap = Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// The controlled plant `x' = f(x) + Gu (phi(x) theta + u)`.
///
/// `phi_row_lipschitz` supplies the per-row moduli `lambda_i(x, xi)` with
/// `|phi_i(x) - phi_i(xi)| <= lambda_i(x, xi) |x - xi|`; the observer gain is
/// built from them. `dphi`, when present, is the analytic directional
/// derivative of `phi`; absent, the controller falls back to central finite
/// differences.
pub struct PlantModel {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub f: VectorMap,
    pub gu: Matrix,
    pub phi: MatrixMap,
    pub phi_row_lipschitz: PairMap,
    pub dphi: Option<DirectionalMatrixMap>,
}

impl PlantModel {
    /// Validates dimensions: `n, m, d >= 1`, `gu` is `n x m`, and `phi`
    /// produces `m x d` when probed at the origin. The construction is
    /// vacuous for `m = 0` or `d = 0`, so those are rejected.
    pub fn new(
        n: usize,
        m: usize,
        d: usize,
        f: VectorMap,
        gu: Matrix,
        phi: MatrixMap,
        phi_row_lipschitz: PairMap,
        dphi: Option<DirectionalMatrixMap>,
    ) -> Result<Self, Error> {
        if n == 0 || m == 0 || d == 0 {
            return Err(Error::InvalidConfig {
                field: "plant dimensions",
                message: alloc::format!("n={n}, m={m}, d={d}; all must be >= 1"),
            });
        }
        if gu.rows() != n || gu.cols() != m {
            return Err(Error::DimensionMismatch { context: "PlantModel gu" });
        }
        let origin = vec![0.0; n];
        let probe = phi(&origin);
        if probe.rows() != m || probe.cols() != d {
            return Err(Error::DimensionMismatch { context: "PlantModel phi" });
        }
        if f(&origin).len() != n {
            return Err(Error::DimensionMismatch { context: "PlantModel f" });
        }
        Ok(PlantModel { n, m, d, f, gu, phi, phi_row_lipschitz, dphi })
    }
}

/// Parameter drift `theta' = S(theta)` together with the metric matrix `H`
/// certifying its contraction and the admissible initial box.
pub struct DriftModel {
    pub s: VectorMap,
    pub js: MatrixMap,
    pub h: Matrix,
    /// Per-coordinate `(lo, hi)` bounds for admissible `theta(t0)`.
    pub theta_box: Vec<(f64, f64)>,
}

impl DriftModel {
    /// Validates that `H` is symmetric positive definite (via Cholesky) and
    /// shaped `d x d`.
    pub fn new(
        d: usize,
        s: VectorMap,
        js: MatrixMap,
        h: Matrix,
        theta_box: Vec<(f64, f64)>,
    ) -> Result<Self, Error> {
        if h.rows() != d || h.cols() != d {
            return Err(Error::DimensionMismatch { context: "DriftModel h" });
        }
        if theta_box.len() != d {
            return Err(Error::DimensionMismatch { context: "DriftModel theta_box" });
        }
        // Probe-solve against the identity: rejects asymmetric or non-SPD H.
        linalg::spd_solve(&h, &Matrix::identity(d))?;
        if let Some((i, _)) = theta_box.iter().enumerate().find(|(_, (lo, hi))| lo > hi) {
            return Err(Error::InvalidConfig {
                field: "theta_box",
                message: alloc::format!("bounds reversed at coordinate {i}"),
            });
        }
        Ok(DriftModel { s, js, h, theta_box })
    }

    pub fn theta_inside_box(&self, theta: &[f64]) -> Result<(), Error> {
        for (i, (&v, (lo, hi))) in theta.iter().zip(&self.theta_box).enumerate() {
            if v < *lo || v > *hi {
                return Err(Error::OutsideThetaBox { index: i, value: v });
            }
        }
        Ok(())
    }
}

/// The regulation target: stabilizing feedback `u0`, level function `psi`
/// whose shaped zero set `{ x : varphi(psi(x)) = 0 }` hosts the target,
/// the gradient bound `kappa`, and the dissipation separation constant.
pub struct TargetSpec {
    pub u0: VectorMap,
    pub psi: ScalarMap,
    pub grad_psi: VectorMap,
    pub varphi: ScalarFun,
    pub kappa: ScalarMap,
    pub dkappa: Option<DirectionalScalarMap>,
    /// Separation constant: the dissipation rate `beta(x)` is assumed to
    /// exceed `2 * beta_min` on the verification region.
    pub beta_min: f64,
    /// Distance-to-target metric; defaults to `|varphi(psi(x))|`.
    pub dist_to_target: Option<ScalarMap>,
}

impl TargetSpec {
    pub fn dist(&self, x: &[f64]) -> f64 {
        match &self.dist_to_target {
            Some(m) => m(x),
            None => num::abs((self.varphi)((self.psi)(x))),
        }
    }
}

/// Which theorem's controller variant runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerVariant {
    /// Gradient-bound route: the adaptation gain carries `kappa^2(xi) + 1`.
    Theorem1,
    /// Integral-gain route: `kappa` is forced to zero throughout.
    Theorem2KappaZero,
}

/// Controller mode: variant plus the scale for the finite-difference
/// fallback used when analytic derivatives are not supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerMode {
    pub variant: ControllerVariant,
    pub fd_step_scale: f64,
}

impl ControllerMode {
    pub fn theorem1() -> Self {
        ControllerMode { variant: ControllerVariant::Theorem1, fd_step_scale: 1.0 }
    }

    pub fn theorem2_kappa_zero() -> Self {
        ControllerMode { variant: ControllerVariant::Theorem2KappaZero, fd_step_scale: 1.0 }
    }

    /// `kappa(x)` as seen by the controller and observer: identically zero
    /// in the `Theorem2KappaZero` variant.
    pub fn kappa(&self, target: &TargetSpec, x: &[f64]) -> f64 {
        match self.variant {
            ControllerVariant::Theorem2KappaZero => 0.0,
            ControllerVariant::Theorem1 => (target.kappa)(x),
        }
    }
}

/// Plant, drift, target, and controller mode bundled for the closed loop.
pub struct Models {
    pub plant: PlantModel,
    pub drift: DriftModel,
    pub target: TargetSpec,
    pub mode: ControllerMode,
}

/// Concatenated simulation state advanced by the integrator.
///
/// The parameter estimate is never stored: it is derived on demand from
/// `(x, xi, theta_hat_i)`, which is exactly the finite-form realization.
/// The true `theta` is carried because diagnostics need it; the controller
/// path never reads it. `eps0..eps2` accumulate the squared norms of the
/// combined system's error channels and are nondecreasing along any
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_hat_i: Vec<f64>,
    pub xi: Vec<f64>,
    pub nu: Vec<f64>,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl SimState {
    pub fn new(
        t: f64,
        x: Vec<f64>,
        theta: Vec<f64>,
        theta_hat_i: Vec<f64>,
        xi: Vec<f64>,
        nu: Vec<f64>,
    ) -> Self {
        SimState { t, x, theta, theta_hat_i, xi, nu, eps0: 0.0, eps1: 0.0, eps2: 0.0 }
    }

    pub fn dims_match(&self, n: usize, d: usize) -> bool {
        self.x.len() == n
            && self.xi.len() == n
            && self.theta.len() == d
            && self.theta_hat_i.len() == d
            && self.nu.len() == d
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && num::all_finite(&self.x)
            && num::all_finite(&self.theta)
            && num::all_finite(&self.theta_hat_i)
            && num::all_finite(&self.xi)
            && num::all_finite(&self.nu)
            && self.eps0.is_finite()
            && self.eps1.is_finite()
            && self.eps2.is_finite()
    }

    /// `self + s * rate`, the vector-space operation RK stages need.
    pub fn axpy(&self, s: f64, rate: &SimState) -> SimState {
        SimState {
            t: self.t + s * rate.t,
            x: num::axpy(&self.x, s, &rate.x),
            theta: num::axpy(&self.theta, s, &rate.theta),
            theta_hat_i: num::axpy(&self.theta_hat_i, s, &rate.theta_hat_i),
            xi: num::axpy(&self.xi, s, &rate.xi),
            nu: num::axpy(&self.nu, s, &rate.nu),
            eps0: self.eps0 + s * rate.eps0,
            eps1: self.eps1 + s * rate.eps1,
            eps2: self.eps2 + s * rate.eps2,
        }
    }

    /// Flattens to one vector (time excluded) for error norms.
    pub fn components(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.x.len() + self.theta.len() + self.theta_hat_i.len() + self.xi.len()
                + self.nu.len()
                + 3,
        );
        out.extend_from_slice(&self.x);
        out.extend_from_slice(&self.theta);
        out.extend_from_slice(&self.theta_hat_i);
        out.extend_from_slice(&self.xi);
        out.extend_from_slice(&self.nu);
        out.push(self.eps0);
        out.push(self.eps1);
        out.push(self.eps2);
        out
    }
}
