//! Benchmark scenarios with analytic assumption certificates, plus
//! construction of scenarios from declarative config.
//!
//! User-defined dynamics are restricted to a registry of named function
//! families plus polynomial coefficient tables. That is a deliberate no-DSL
//! decision: configs stay declarative and the numeric core stays auditable.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::DiagnosticsConfig;
use crate::dynamics;
use crate::error::Error;
use crate::integrate::{IntegrationConfig, StepMethod};
use crate::linalg::{self, Matrix};
use crate::model::{
    ControllerMode, DirectionalMatrixMap, DirectionalScalarMap, DriftModel, MatrixMap, Models,
    PairMap, PlantModel, ScalarFun, ScalarMap, SimState, TargetSpec, VectorMap,
};
use crate::num;
use crate::quad::SampleRegion;

pub const BUILTIN_NAMES: [&str; 4] =
    ["scalar-equilibrium", "hopf-circle", "hopf-circle-drift", "hopf-circle-kappa-zero"];

/// A fully assembled benchmark: models, initial state, integration and
/// diagnostics settings, and the author's analytic certificates.
pub struct Scenario {
    pub name: String,
    pub models: Models,
    pub s0: SimState,
    pub integration: IntegrationConfig,
    pub diagnostics: DiagnosticsConfig,
    /// Assumptions certified analytically by the scenario author rather
    /// than checked by sampling.
    pub asserted_assumptions: Vec<String>,
    /// Whether the regressor along this scenario's trajectories is expected
    /// to stay persistently exciting.
    pub expect_pe: bool,
    pub pe_note: Option<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), Error> {
        let (n, d) = (self.models.plant.n, self.models.plant.d);
        if !self.s0.dims_match(n, d) {
            return Err(Error::DimensionMismatch { context: "Scenario s0" });
        }
        self.models.drift.theta_inside_box(&self.s0.theta)?;
        self.integration.validate()?;
        self.diagnostics.validate()?;
        if self.diagnostics.sample_region.dim() != n {
            return Err(Error::DimensionMismatch { context: "Scenario sample_region" });
        }
        Ok(())
    }

    pub fn report_context(&self) -> crate::diagnostics::ReportContext<'_> {
        crate::diagnostics::ReportContext {
            scenario_name: &self.name,
            expect_pe: self.expect_pe,
            pe_note: self.pe_note.as_deref(),
            asserted_assumptions: &self.asserted_assumptions,
        }
    }

    /// Re-initializes so the observer starts on the plant (`xi = x`,
    /// `nu = theta`) and the estimate starts on the true parameters
    /// (`theta_hat_i = theta - H^{-1} Psi(xi) x`). The exact flow keeps all
    /// error channels at zero from this start.
    pub fn identity_initialized(mut self) -> Result<Scenario, Error> {
        self.s0.xi = self.s0.x.clone();
        self.s0.nu = self.s0.theta.clone();
        let psi_x = dynamics::big_psi(
            &self.models.plant,
            &self.models.target,
            &self.models.mode,
            &self.s0.xi,
        )?
        .mul_vec(&self.s0.x)?;
        let correction = linalg::spd_solve_vec(&self.models.drift.h, &psi_x)?;
        self.s0.theta_hat_i = num::sub(&self.s0.theta, &correction);
        Ok(self)
    }
}

// ---------------------------------------------------------------------------
// Builtin component factories (also exposed through the named registry)
// ---------------------------------------------------------------------------

mod parts {
    use super::*;

    pub fn scalar_f() -> VectorMap {
        Box::new(|x: &[f64]| vec![x[0]])
    }

    pub fn scalar_phi() -> MatrixMap {
        Box::new(|x: &[f64]| Matrix::new(1, 1, vec![x[0]]).expect("finite"))
    }

    pub fn scalar_dphi() -> DirectionalMatrixMap {
        Box::new(|_: &[f64], v: &[f64]| Matrix::new(1, 1, vec![v[0]]).expect("finite"))
    }

    pub fn scalar_u0() -> VectorMap {
        Box::new(|x: &[f64]| vec![-2.0 * x[0]])
    }

    pub fn scalar_psi() -> ScalarMap {
        Box::new(|x: &[f64]| x[0])
    }

    pub fn scalar_grad_psi() -> VectorMap {
        Box::new(|_: &[f64]| vec![1.0])
    }

    pub fn unit_lipschitz(m: usize) -> PairMap {
        Box::new(move |_: &[f64], _: &[f64]| vec![1.0; m])
    }

    pub fn identity_varphi() -> ScalarFun {
        Box::new(|s| s)
    }

    pub fn constant_kappa(c: f64) -> ScalarMap {
        Box::new(move |_: &[f64]| c)
    }

    pub fn zero_dkappa() -> DirectionalScalarMap {
        Box::new(|_: &[f64], _: &[f64]| 0.0)
    }

    pub fn zero_s(d: usize) -> VectorMap {
        Box::new(move |_: &[f64]| vec![0.0; d])
    }

    pub fn zero_js(d: usize) -> MatrixMap {
        Box::new(move |_: &[f64]| Matrix::zeros(d, d))
    }

    pub fn hopf_psi_val(x: &[f64]) -> f64 {
        x[0] * x[0] + x[1] * x[1] - 1.0
    }

    pub fn hopf_f() -> VectorMap {
        Box::new(|x: &[f64]| {
            let psi = hopf_psi_val(x);
            vec![-x[1] - psi * x[0], x[0]]
        })
    }

    pub fn hopf_phi() -> MatrixMap {
        Box::new(|x: &[f64]| Matrix::new(1, 2, vec![x[0], x[1]]).expect("finite"))
    }

    pub fn hopf_dphi() -> DirectionalMatrixMap {
        Box::new(|_: &[f64], v: &[f64]| Matrix::new(1, 2, vec![v[0], v[1]]).expect("finite"))
    }

    pub fn hopf_u0() -> VectorMap {
        Box::new(|x: &[f64]| vec![-hopf_psi_val(x) * x[1]])
    }

    pub fn hopf_psi() -> ScalarMap {
        Box::new(hopf_psi_val)
    }

    pub fn hopf_grad_psi() -> VectorMap {
        Box::new(|x: &[f64]| vec![2.0 * x[0], 2.0 * x[1]])
    }

    /// kappa(x) = 2 |x| + 1, which dominates |grad psi| = 2 |x| with margin 1.
    pub fn hopf_kappa() -> ScalarMap {
        Box::new(|x: &[f64]| 2.0 * num::norm(x) + 1.0)
    }

    /// Directional derivative of `hopf_kappa`. The norm is not smooth at the
    /// origin; 0 is returned there (the product it multiplies vanishes with
    /// the regressor at that point).
    pub fn hopf_dkappa() -> DirectionalScalarMap {
        Box::new(|x: &[f64], v: &[f64]| {
            let n = num::norm(x);
            if n == 0.0 {
                0.0
            } else {
                2.0 * num::dot(x, v) / n
            }
        })
    }

    pub fn hopf_drift_s(omega: f64) -> VectorMap {
        Box::new(move |t: &[f64]| vec![omega * t[1], -omega * t[0]])
    }

    pub fn hopf_drift_js(omega: f64) -> MatrixMap {
        Box::new(move |_: &[f64]| {
            Matrix::from_rows(&[vec![0.0, omega], vec![-omega, 0.0]]).expect("finite")
        })
    }
}

const HOPF_OMEGA: f64 = 0.5;

fn scalar_equilibrium() -> Scenario {
    let plant = PlantModel::new(
        1,
        1,
        1,
        parts::scalar_f(),
        Matrix::identity(1),
        parts::scalar_phi(),
        parts::unit_lipschitz(1),
        Some(parts::scalar_dphi()),
    )
    .expect("scalar plant is well formed");
    let drift = DriftModel::new(
        1,
        parts::zero_s(1),
        parts::zero_js(1),
        Matrix::identity(1),
        vec![(-4.0, 4.0)],
    )
    .expect("scalar drift is well formed");
    let target = TargetSpec {
        u0: parts::scalar_u0(),
        psi: parts::scalar_psi(),
        grad_psi: parts::scalar_grad_psi(),
        varphi: parts::identity_varphi(),
        kappa: parts::constant_kappa(1.0),
        dkappa: Some(parts::zero_dkappa()),
        beta_min: 0.5,
        dist_to_target: None,
    };
    let mut diagnostics = DiagnosticsConfig::desk_default(1);
    diagnostics.sample_region = SampleRegion { lo: vec![-3.0], hi: vec![3.0], min_norm: 0.0 };
    diagnostics.pe_window = 2.0;
    diagnostics.pe_delta = 0.1;
    diagnostics.finite_form_tol = 1e-4;

    Scenario {
        name: "scalar-equilibrium".to_string(),
        models: Models { plant, drift, target, mode: ControllerMode::theorem1() },
        s0: SimState::new(0.0, vec![1.0], vec![2.0], vec![0.0], vec![0.0], vec![0.0]),
        integration: IntegrationConfig::fixed(0.0, 10.0, 1e-3),
        diagnostics,
        asserted_assumptions: vec![
            "target-bounded-closed".to_string(),
            "psi-bounds-state".to_string(),
        ],
        expect_pe: false,
        pe_note: Some("regressor vanishes".to_string()),
    }
}

fn hopf_circle(drift_on: bool, kappa_zero: bool) -> Scenario {
    let plant = PlantModel::new(
        2,
        1,
        2,
        parts::hopf_f(),
        Matrix::from_rows(&[vec![0.0], vec![1.0]]).expect("finite"),
        parts::hopf_phi(),
        parts::unit_lipschitz(1),
        Some(parts::hopf_dphi()),
    )
    .expect("hopf plant is well formed");
    let (s, js): (VectorMap, MatrixMap) = if drift_on {
        (parts::hopf_drift_s(HOPF_OMEGA), parts::hopf_drift_js(HOPF_OMEGA))
    } else {
        (parts::zero_s(2), parts::zero_js(2))
    };
    let drift = DriftModel::new(2, s, js, Matrix::identity(2), vec![(-1.0, 1.0), (-1.0, 1.0)])
        .expect("hopf drift is well formed");
    let target = TargetSpec {
        u0: parts::hopf_u0(),
        psi: parts::hopf_psi(),
        grad_psi: parts::hopf_grad_psi(),
        varphi: parts::identity_varphi(),
        kappa: parts::hopf_kappa(),
        dkappa: Some(parts::hopf_dkappa()),
        beta_min: 0.04,
        dist_to_target: None,
    };
    let mode =
        if kappa_zero { ControllerMode::theorem2_kappa_zero() } else { ControllerMode::theorem1() };

    let mut diagnostics = DiagnosticsConfig::desk_default(2);
    diagnostics.sample_region =
        SampleRegion { lo: vec![-3.0, -3.0], hi: vec![3.0, 3.0], min_norm: 0.2 };
    diagnostics.sample_count = 512;
    diagnostics.pe_window = 2.0 * core::f64::consts::PI;
    diagnostics.pe_delta = 2.5;
    diagnostics.finite_form_tol = 1e-3;

    let name = if kappa_zero {
        "hopf-circle-kappa-zero"
    } else if drift_on {
        "hopf-circle-drift"
    } else {
        "hopf-circle"
    };
    let mut asserted =
        vec!["target-bounded-closed".to_string(), "psi-bounds-state".to_string()];
    if kappa_zero {
        asserted.push("l2-to-linf-gain".to_string());
    }
    // The gradient-bound gain over-damps the observer on the circle
    // (injection ~ 2 + kappa^2 ~ 11), so the parameter channel of the
    // embedding pair decays at roughly delta / (T lambda) ~ 0.05. The
    // kappa-zero variant has injection 2 and settles well within 40.
    let t_end = if kappa_zero { 40.0 } else { 120.0 };

    Scenario {
        name: name.to_string(),
        models: Models { plant, drift, target, mode },
        s0: SimState::new(
            0.0,
            vec![2.0, 0.0],
            vec![0.5, -0.5],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
        ),
        integration: IntegrationConfig::fixed(0.0, t_end, 1e-3),
        diagnostics,
        asserted_assumptions: asserted,
        expect_pe: true,
        pe_note: None,
    }
}

/// Builds one of the named benchmark scenarios.
pub fn builtin(name: &str) -> Result<Scenario, Error> {
    let sc = match name {
        "scalar-equilibrium" => scalar_equilibrium(),
        "hopf-circle" => hopf_circle(false, false),
        "hopf-circle-drift" => hopf_circle(true, false),
        "hopf-circle-kappa-zero" => hopf_circle(false, true),
        other => return Err(Error::UnknownScenario { name: other.to_string() }),
    };
    sc.validate()?;
    Ok(sc)
}

// ---------------------------------------------------------------------------
// Declarative config
// ---------------------------------------------------------------------------

/// One monomial: `c * prod_k args[k]^p[k]`. The powers list must match the
/// input dimension of the map being defined.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolyTerm {
    pub c: f64,
    pub p: Vec<u32>,
}

/// A function referenced by registry name or given as a polynomial table.
///
/// For vector-valued maps `poly` holds one term list per output coordinate;
/// for matrix-valued maps `poly_matrix` holds them in row-major order.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum FnSpec {
    Named { name: String },
    Poly { poly: Vec<Vec<PolyTerm>> },
    PolyMatrix { poly_matrix: Vec<Vec<Vec<PolyTerm>>> },
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialOverride {
    pub x: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub theta_hat_i: Option<Vec<f64>>,
    pub xi: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    /// Re-initialize with `xi = x`, `nu = theta`, estimate on the true
    /// parameters (applied after the explicit overrides above).
    pub identity: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationOverride {
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub method: Option<String>,
    pub h: Option<f64>,
    pub h_init: Option<f64>,
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
    pub log_stride: Option<usize>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsOverride {
    pub pe_window: Option<f64>,
    pub pe_delta: Option<f64>,
    pub pe_transient_fraction: Option<f64>,
    pub monotonicity_slack: Option<f64>,
    pub l2_tail_fraction: Option<f64>,
    pub l2_tail_ratio: Option<f64>,
    pub sample_count: Option<usize>,
    pub sample_region: Option<SampleRegion>,
    pub convergence_threshold: Option<f64>,
    pub convergence_tail_fraction: Option<f64>,
    pub observer_threshold: Option<f64>,
    pub bound_cap_factor: Option<f64>,
    pub finite_form_tol: Option<f64>,
    pub rate_fit_residual_max: Option<f64>,
    pub drift_eig_tol: Option<f64>,
    pub dissipation_tol: Option<f64>,
    pub gradient_tol: Option<f64>,
    pub invariance_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub f: FnSpec,
    pub gu: Vec<Vec<f64>>,
    pub phi: FnSpec,
    /// Per-row Lipschitz moduli as constants. Absent for polynomial `phi`,
    /// a bound is estimated from the row Jacobians along sampled segments.
    pub lipschitz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub s: Option<FnSpec>,
    pub js: Option<FnSpec>,
    pub h: Option<Vec<Vec<f64>>>,
    pub theta_box: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub u0: Option<FnSpec>,
    pub psi: Option<FnSpec>,
    pub grad_psi: Option<FnSpec>,
    pub varphi: Option<FnSpec>,
    pub kappa: Option<FnSpec>,
    pub beta_min: Option<f64>,
}

/// The parsed run configuration: a builtin base plus overrides, or a fully
/// inline definition (plant + drift + target all present, `scenario`
/// absent).
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<String>,
    pub name: Option<String>,
    pub mode: Option<String>,
    pub expect_pe: Option<bool>,
    pub pe_note: Option<String>,
    pub asserted_assumptions: Option<Vec<String>>,
    pub initial: Option<InitialOverride>,
    pub integration: Option<IntegrationOverride>,
    pub diagnostics: Option<DiagnosticsOverride>,
    pub plant: Option<PlantConfig>,
    pub drift: Option<DriftConfig>,
    pub target: Option<TargetConfig>,
}

fn schema_err(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), message: message.into() }
}

// ---------------------------------------------------------------------------
// Polynomial tables
// ---------------------------------------------------------------------------

fn poly_eval(terms: &[PolyTerm], args: &[f64]) -> f64 {
    let mut acc = 0.0;
    for term in terms {
        let mut v = term.c;
        for (k, &pw) in term.p.iter().enumerate() {
            for _ in 0..pw {
                v *= args[k];
            }
        }
        acc += v;
    }
    acc
}

fn poly_validate(terms: &[Vec<PolyTerm>], in_dim: usize, path: &str) -> Result<(), Error> {
    for (i, coord) in terms.iter().enumerate() {
        for (j, term) in coord.iter().enumerate() {
            if term.p.len() != in_dim {
                return Err(schema_err(
                    &format!("{path}[{i}][{j}].p"),
                    format!("expected {} powers, found {}", in_dim, term.p.len()),
                ));
            }
            if !term.c.is_finite() {
                return Err(schema_err(&format!("{path}[{i}][{j}].c"), "must be finite"));
            }
        }
    }
    Ok(())
}

/// Partial derivative of a term list with respect to coordinate `j`.
fn poly_partial(terms: &[PolyTerm], j: usize) -> Vec<PolyTerm> {
    let mut out = Vec::new();
    for term in terms {
        if term.p[j] == 0 {
            continue;
        }
        let mut p = term.p.clone();
        p[j] -= 1;
        out.push(PolyTerm { c: term.c * term.p[j] as f64, p });
    }
    out
}

fn poly_vector_map(terms: Vec<Vec<PolyTerm>>) -> VectorMap {
    Box::new(move |x: &[f64]| terms.iter().map(|t| poly_eval(t, x)).collect())
}

fn poly_scalar_map(terms: Vec<PolyTerm>) -> ScalarMap {
    Box::new(move |x: &[f64]| poly_eval(&terms, x))
}

fn poly_scalar_fun(terms: Vec<PolyTerm>) -> ScalarFun {
    Box::new(move |s: f64| poly_eval(&terms, &[s]))
}

fn poly_matrix_map(rows: Vec<Vec<Vec<PolyTerm>>>, r: usize, c: usize) -> MatrixMap {
    Box::new(move |x: &[f64]| {
        let mut m = Matrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, terms) in row.iter().enumerate() {
                m.set(i, j, poly_eval(terms, x));
            }
        }
        m
    })
}

/// Analytic directional derivative of a polynomial matrix map.
fn poly_matrix_directional(rows: &[Vec<Vec<PolyTerm>>], r: usize, c: usize) -> DirectionalMatrixMap {
    let partials: Vec<Vec<Vec<Vec<PolyTerm>>>> = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|terms| {
                    let in_dim = terms.first().map_or(0, |t| t.p.len());
                    (0..in_dim).map(|j| poly_partial(terms, j)).collect()
                })
                .collect()
        })
        .collect();
    Box::new(move |x: &[f64], v: &[f64]| {
        let mut m = Matrix::zeros(r, c);
        for (i, row) in partials.iter().enumerate() {
            for (j, by_coord) in row.iter().enumerate() {
                let mut acc = 0.0;
                for (k, terms) in by_coord.iter().enumerate() {
                    if !terms.is_empty() {
                        acc += v[k] * poly_eval(terms, x);
                    }
                }
                m.set(i, j, acc);
            }
        }
        m
    })
}

fn poly_scalar_directional(terms: &[PolyTerm], in_dim: usize) -> DirectionalScalarMap {
    let partials: Vec<Vec<PolyTerm>> = (0..in_dim).map(|j| poly_partial(terms, j)).collect();
    Box::new(move |x: &[f64], v: &[f64]| {
        let mut acc = 0.0;
        for (k, terms) in partials.iter().enumerate() {
            if !terms.is_empty() {
                acc += v[k] * poly_eval(terms, x);
            }
        }
        acc
    })
}

/// Conservative per-row Lipschitz moduli for a polynomial regressor: the
/// largest row-Jacobian Frobenius norm over interleaved samples of the
/// segment between the two query points, padded by half.
fn poly_phi_lipschitz(rows: Vec<Vec<Vec<PolyTerm>>>, m: usize, in_dim: usize) -> PairMap {
    let partials: Vec<Vec<Vec<Vec<PolyTerm>>>> = rows
        .iter()
        .map(|row| {
            row.iter().map(|terms| (0..in_dim).map(|j| poly_partial(terms, j)).collect()).collect()
        })
        .collect();
    Box::new(move |x: &[f64], xi: &[f64]| {
        let mut out = vec![0.0; m];
        for (i, row) in partials.iter().enumerate() {
            let mut worst = 0.0_f64;
            for step in 0..=8 {
                let lam = step as f64 / 8.0;
                let p: Vec<f64> =
                    x.iter().zip(xi).map(|(a, b)| a + lam * (b - a)).collect();
                let mut fro = 0.0;
                for by_coord in row {
                    for terms in by_coord {
                        let v = poly_eval(terms, &p);
                        fro += v * v;
                    }
                }
                worst = worst.max(num::sqrt(fro));
            }
            out[i] = 1.5 * worst;
        }
        out
    })
}

// ---------------------------------------------------------------------------
// Named function registry
// ---------------------------------------------------------------------------

fn named_vector_map(name: &str) -> Option<VectorMap> {
    Some(match name {
        "scalar-equilibrium.f" => parts::scalar_f(),
        "scalar-equilibrium.u0" => parts::scalar_u0(),
        "scalar-equilibrium.grad-psi" => parts::scalar_grad_psi(),
        "hopf-circle.f" => parts::hopf_f(),
        "hopf-circle.u0" => parts::hopf_u0(),
        "hopf-circle.grad-psi" => parts::hopf_grad_psi(),
        "hopf-circle-drift.s" => parts::hopf_drift_s(HOPF_OMEGA),
        _ => return None,
    })
}

fn named_matrix_map(name: &str) -> Option<(MatrixMap, Option<DirectionalMatrixMap>)> {
    Some(match name {
        "scalar-equilibrium.phi" => (parts::scalar_phi(), Some(parts::scalar_dphi())),
        "hopf-circle.phi" => (parts::hopf_phi(), Some(parts::hopf_dphi())),
        "hopf-circle-drift.js" => (parts::hopf_drift_js(HOPF_OMEGA), None),
        _ => return None,
    })
}

fn named_scalar_map(name: &str) -> Option<(ScalarMap, Option<DirectionalScalarMap>)> {
    Some(match name {
        "scalar-equilibrium.psi" => (parts::scalar_psi(), None),
        "scalar-equilibrium.kappa" => (parts::constant_kappa(1.0), Some(parts::zero_dkappa())),
        "hopf-circle.psi" => (parts::hopf_psi(), None),
        "hopf-circle.kappa" => (parts::hopf_kappa(), Some(parts::hopf_dkappa())),
        _ => return None,
    })
}

fn named_scalar_fun(name: &str) -> Option<ScalarFun> {
    Some(match name {
        "identity" => parts::identity_varphi(),
        _ => return None,
    })
}

fn vector_map_from_spec(spec: &FnSpec, in_dim: usize, path: &str) -> Result<VectorMap, Error> {
    match spec {
        FnSpec::Named { name } => {
            named_vector_map(name).ok_or_else(|| schema_err(path, format!("unknown function '{name}'")))
        }
        FnSpec::Poly { poly } => {
            poly_validate(poly, in_dim, path)?;
            Ok(poly_vector_map(poly.clone()))
        }
        FnSpec::PolyMatrix { .. } => Err(schema_err(path, "expected a vector-valued function")),
    }
}

fn scalar_map_from_spec(
    spec: &FnSpec,
    in_dim: usize,
    path: &str,
) -> Result<(ScalarMap, Option<DirectionalScalarMap>), Error> {
    match spec {
        FnSpec::Named { name } => {
            named_scalar_map(name).ok_or_else(|| schema_err(path, format!("unknown function '{name}'")))
        }
        FnSpec::Poly { poly } => {
            if poly.len() != 1 {
                return Err(schema_err(path, "scalar function takes exactly one term list"));
            }
            poly_validate(poly, in_dim, path)?;
            let dir = poly_scalar_directional(&poly[0], in_dim);
            Ok((poly_scalar_map(poly[0].clone()), Some(dir)))
        }
        FnSpec::PolyMatrix { .. } => Err(schema_err(path, "expected a scalar-valued function")),
    }
}

fn scalar_fun_from_spec(spec: &FnSpec, path: &str) -> Result<ScalarFun, Error> {
    match spec {
        FnSpec::Named { name } => {
            named_scalar_fun(name).ok_or_else(|| schema_err(path, format!("unknown function '{name}'")))
        }
        FnSpec::Poly { poly } => {
            if poly.len() != 1 {
                return Err(schema_err(path, "scalar function takes exactly one term list"));
            }
            poly_validate(poly, 1, path)?;
            Ok(poly_scalar_fun(poly[0].clone()))
        }
        FnSpec::PolyMatrix { .. } => Err(schema_err(path, "expected a scalar function of one variable")),
    }
}

fn matrix_map_from_spec(
    spec: &FnSpec,
    in_dim: usize,
    rows: usize,
    cols: usize,
    path: &str,
) -> Result<(MatrixMap, Option<DirectionalMatrixMap>), Error> {
    match spec {
        FnSpec::Named { name } => {
            named_matrix_map(name).ok_or_else(|| schema_err(path, format!("unknown function '{name}'")))
        }
        FnSpec::PolyMatrix { poly_matrix } => {
            if poly_matrix.len() != rows || poly_matrix.iter().any(|r| r.len() != cols) {
                return Err(schema_err(path, format!("expected a {rows} x {cols} table")));
            }
            for (i, row) in poly_matrix.iter().enumerate() {
                poly_validate(row, in_dim, &format!("{path}[{i}]"))?;
            }
            let dir = poly_matrix_directional(poly_matrix, rows, cols);
            Ok((poly_matrix_map(poly_matrix.clone(), rows, cols), Some(dir)))
        }
        FnSpec::Poly { poly } if rows == 1 => {
            // A single-row matrix may be written as a plain vector table.
            matrix_map_from_spec(
                &FnSpec::PolyMatrix { poly_matrix: vec![poly.clone()] },
                in_dim,
                rows,
                cols,
                path,
            )
        }
        FnSpec::Poly { .. } => Err(schema_err(path, "expected a matrix-valued function")),
    }
}

fn matrix_from_rows_cfg(rows: &[Vec<f64>], path: &str) -> Result<Matrix, Error> {
    Matrix::from_rows(rows).map_err(|e| schema_err(path, format!("{e}")))
}

// ---------------------------------------------------------------------------
// Config assembly
// ---------------------------------------------------------------------------

fn parse_mode(s: &str, path: &str) -> Result<ControllerMode, Error> {
    match s {
        "theorem1" => Ok(ControllerMode::theorem1()),
        "theorem2" | "theorem2-kappa-zero" => Ok(ControllerMode::theorem2_kappa_zero()),
        other => Err(schema_err(path, format!("unknown mode '{other}'"))),
    }
}

fn inline_models(cfg: &ScenarioConfig) -> Result<(Models, usize, usize, usize), Error> {
    let plant_cfg =
        cfg.plant.as_ref().ok_or_else(|| schema_err("plant", "required for inline scenarios"))?;
    let drift_cfg =
        cfg.drift.as_ref().ok_or_else(|| schema_err("drift", "required for inline scenarios"))?;
    let target_cfg =
        cfg.target.as_ref().ok_or_else(|| schema_err("target", "required for inline scenarios"))?;
    let (n, m, d) = (plant_cfg.n, plant_cfg.m, plant_cfg.d);

    let f = vector_map_from_spec(&plant_cfg.f, n, "plant.f")?;
    let gu = matrix_from_rows_cfg(&plant_cfg.gu, "plant.gu")?;
    let (phi, dphi) = matrix_map_from_spec(&plant_cfg.phi, n, m, d, "plant.phi")?;
    let lipschitz: PairMap = match (&plant_cfg.lipschitz, &plant_cfg.phi) {
        (Some(consts), _) => {
            if consts.len() != m {
                return Err(schema_err("plant.lipschitz", format!("expected {m} entries")));
            }
            let consts = consts.clone();
            Box::new(move |_: &[f64], _: &[f64]| consts.clone())
        }
        (None, FnSpec::PolyMatrix { poly_matrix }) => {
            poly_phi_lipschitz(poly_matrix.clone(), m, n)
        }
        (None, FnSpec::Poly { poly }) if m == 1 => {
            poly_phi_lipschitz(vec![poly.clone()], m, n)
        }
        (None, _) => {
            return Err(schema_err(
                "plant.lipschitz",
                "required when phi is referenced by name",
            ))
        }
    };
    let plant = PlantModel::new(n, m, d, f, gu, phi, lipschitz, dphi)
        .map_err(|e| schema_err("plant", format!("{e}")))?;

    let s_spec =
        drift_cfg.s.as_ref().ok_or_else(|| schema_err("drift.s", "required for inline scenarios"))?;
    let js_spec = drift_cfg
        .js
        .as_ref()
        .ok_or_else(|| schema_err("drift.js", "required for inline scenarios"))?;
    let h_rows =
        drift_cfg.h.as_ref().ok_or_else(|| schema_err("drift.h", "required for inline scenarios"))?;
    let theta_box = drift_cfg
        .theta_box
        .as_ref()
        .ok_or_else(|| schema_err("drift.theta_box", "required for inline scenarios"))?;
    let s = vector_map_from_spec(s_spec, d, "drift.s")?;
    let (js, _) = matrix_map_from_spec(js_spec, d, d, d, "drift.js")?;
    let h = matrix_from_rows_cfg(h_rows, "drift.h")?;
    let drift = DriftModel::new(
        d,
        s,
        js,
        h,
        theta_box.iter().map(|b| (b[0], b[1])).collect(),
    )?;

    let req = |field: &Option<FnSpec>, path: &'static str| {
        field.clone().ok_or_else(|| schema_err(path, "required for inline scenarios"))
    };
    let u0 = vector_map_from_spec(&req(&target_cfg.u0, "target.u0")?, n, "target.u0")?;
    let (psi, _) = scalar_map_from_spec(&req(&target_cfg.psi, "target.psi")?, n, "target.psi")?;
    let grad_psi =
        vector_map_from_spec(&req(&target_cfg.grad_psi, "target.grad_psi")?, n, "target.grad_psi")?;
    let varphi = scalar_fun_from_spec(&req(&target_cfg.varphi, "target.varphi")?, "target.varphi")?;
    let (kappa, dkappa) =
        scalar_map_from_spec(&req(&target_cfg.kappa, "target.kappa")?, n, "target.kappa")?;
    let beta_min = target_cfg
        .beta_min
        .ok_or_else(|| schema_err("target.beta_min", "required for inline scenarios"))?;
    if !(beta_min > 0.0) {
        return Err(schema_err("target.beta_min", "must be positive"));
    }
    let target = TargetSpec {
        u0,
        psi,
        grad_psi,
        varphi,
        kappa,
        dkappa,
        beta_min,
        dist_to_target: None,
    };

    let mode = match &cfg.mode {
        Some(s) => parse_mode(s, "mode")?,
        None => ControllerMode::theorem1(),
    };
    Ok((Models { plant, drift, target, mode }, n, m, d))
}

fn apply_drift_override(sc: &mut Scenario, over: &DriftConfig) -> Result<(), Error> {
    let d = sc.models.plant.d;
    if let Some(h_rows) = &over.h {
        let h = matrix_from_rows_cfg(h_rows, "drift.h")?;
        // Rebuilding through the constructor keeps the SPD gate.
        let old = core::mem::replace(
            &mut sc.models.drift,
            DriftModel::new(d, parts::zero_s(d), parts::zero_js(d), Matrix::identity(d), vec![(0.0, 0.0); d])
                .expect("placeholder drift"),
        );
        sc.models.drift = DriftModel::new(d, old.s, old.js, h, old.theta_box)?;
    }
    if let Some(bounds) = &over.theta_box {
        if bounds.len() != d {
            return Err(schema_err("drift.theta_box", format!("expected {d} bounds")));
        }
        sc.models.drift.theta_box = bounds.iter().map(|b| (b[0], b[1])).collect();
    }
    match (&over.s, &over.js) {
        (Some(s_spec), Some(js_spec)) => {
            sc.models.drift.s = vector_map_from_spec(s_spec, d, "drift.s")?;
            sc.models.drift.js = matrix_map_from_spec(js_spec, d, d, d, "drift.js")?.0;
        }
        (None, None) => {}
        _ => return Err(schema_err("drift", "s and js must be overridden together")),
    }
    Ok(())
}

fn apply_target_override(sc: &mut Scenario, over: &TargetConfig) -> Result<(), Error> {
    let n = sc.models.plant.n;
    if let Some(spec) = &over.u0 {
        sc.models.target.u0 = vector_map_from_spec(spec, n, "target.u0")?;
    }
    if let Some(spec) = &over.psi {
        sc.models.target.psi = scalar_map_from_spec(spec, n, "target.psi")?.0;
    }
    if let Some(spec) = &over.grad_psi {
        sc.models.target.grad_psi = vector_map_from_spec(spec, n, "target.grad_psi")?;
    }
    if let Some(spec) = &over.varphi {
        sc.models.target.varphi = scalar_fun_from_spec(spec, "target.varphi")?;
    }
    if let Some(spec) = &over.kappa {
        let (kappa, dkappa) = scalar_map_from_spec(spec, n, "target.kappa")?;
        sc.models.target.kappa = kappa;
        sc.models.target.dkappa = dkappa;
    }
    if let Some(b) = over.beta_min {
        if !(b > 0.0) {
            return Err(schema_err("target.beta_min", "must be positive"));
        }
        sc.models.target.beta_min = b;
    }
    Ok(())
}

fn apply_integration_override(
    cfg: &mut IntegrationConfig,
    over: &IntegrationOverride,
) -> Result<(), Error> {
    if let Some(v) = over.t0 {
        cfg.t0 = v;
    }
    if let Some(v) = over.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = over.log_stride {
        cfg.log_stride = v;
    }
    if let Some(v) = over.max_steps {
        cfg.max_steps = v;
    }
    let want_adaptive = match over.method.as_deref() {
        Some("fixed") => Some(false),
        Some("adaptive") => Some(true),
        Some(other) => {
            return Err(schema_err("integration.method", format!("unknown method '{other}'")))
        }
        None => None,
    };
    match (want_adaptive, &mut cfg.method) {
        (Some(true), m) => {
            *m = StepMethod::Adaptive {
                h_init: over.h_init.or(over.h).unwrap_or(1e-3),
                tol_rel: over.tol_rel.unwrap_or(1e-9),
                tol_abs: over.tol_abs.unwrap_or(1e-12),
            };
        }
        (Some(false), m) => {
            let h = over.h.unwrap_or(match m {
                StepMethod::Fixed { h } => *h,
                StepMethod::Adaptive { h_init, .. } => *h_init,
            });
            *m = StepMethod::Fixed { h };
        }
        (None, StepMethod::Fixed { h }) => {
            if let Some(v) = over.h {
                *h = v;
            }
        }
        (None, StepMethod::Adaptive { h_init, tol_rel, tol_abs }) => {
            if let Some(v) = over.h_init.or(over.h) {
                *h_init = v;
            }
            if let Some(v) = over.tol_rel {
                *tol_rel = v;
            }
            if let Some(v) = over.tol_abs {
                *tol_abs = v;
            }
        }
    }
    Ok(())
}

fn apply_diagnostics_override(cfg: &mut DiagnosticsConfig, over: &DiagnosticsOverride) {
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = over.$field.clone() { cfg.$field = v; })*
        };
    }
    set!(
        pe_window,
        pe_delta,
        pe_transient_fraction,
        monotonicity_slack,
        l2_tail_fraction,
        l2_tail_ratio,
        sample_count,
        sample_region,
        convergence_threshold,
        convergence_tail_fraction,
        observer_threshold,
        bound_cap_factor,
        finite_form_tol,
        rate_fit_residual_max
    );
    if let Some(v) = over.drift_eig_tol {
        cfg.tols.drift_eig = v;
    }
    if let Some(v) = over.dissipation_tol {
        cfg.tols.dissipation = v;
    }
    if let Some(v) = over.gradient_tol {
        cfg.tols.gradient = v;
    }
    if let Some(v) = over.invariance_tol {
        cfg.tols.invariance = v;
    }
}

/// Builds a scenario from a parsed declarative config: either a builtin
/// base with overrides, or a fully inline definition.
pub fn from_config(cfg: &ScenarioConfig) -> Result<Scenario, Error> {
    let mut sc = match &cfg.scenario {
        Some(name) => {
            if cfg.plant.is_some() {
                return Err(schema_err(
                    "plant",
                    "inline plant requires an inline scenario; drop the 'scenario' key",
                ));
            }
            let mut sc = builtin(name)?;
            if let Some(mode) = &cfg.mode {
                sc.models.mode = parse_mode(mode, "mode")?;
            }
            sc
        }
        None => {
            let (models, n, _, d) = inline_models(cfg)?;
            let initial = cfg
                .initial
                .as_ref()
                .ok_or_else(|| schema_err("initial", "required for inline scenarios"))?;
            let x = initial
                .x
                .clone()
                .ok_or_else(|| schema_err("initial.x", "required for inline scenarios"))?;
            let theta = initial
                .theta
                .clone()
                .ok_or_else(|| schema_err("initial.theta", "required for inline scenarios"))?;
            let s0 = SimState::new(
                0.0,
                x,
                theta,
                initial.theta_hat_i.clone().unwrap_or_else(|| vec![0.0; d]),
                initial.xi.clone().unwrap_or_else(|| vec![0.0; n]),
                initial.nu.clone().unwrap_or_else(|| vec![0.0; d]),
            );
            Scenario {
                name: "inline".to_string(),
                models,
                s0,
                integration: IntegrationConfig::fixed(0.0, 10.0, 1e-3),
                diagnostics: DiagnosticsConfig::desk_default(n),
                asserted_assumptions: Vec::new(),
                expect_pe: true,
                pe_note: None,
            }
        }
    };

    if let Some(over) = &cfg.drift {
        apply_drift_override(&mut sc, over)?;
    }
    if let Some(over) = &cfg.target {
        apply_target_override(&mut sc, over)?;
    }
    if let Some(initial) = &cfg.initial {
        let check_dim = |v: &Option<Vec<f64>>, want: usize, path: &str| -> Result<(), Error> {
            match v {
                Some(vals) if vals.len() != want => {
                    Err(schema_err(path, format!("expected {want} entries, found {}", vals.len())))
                }
                _ => Ok(()),
            }
        };
        let (n, d) = (sc.models.plant.n, sc.models.plant.d);
        check_dim(&initial.x, n, "initial.x")?;
        check_dim(&initial.xi, n, "initial.xi")?;
        check_dim(&initial.theta, d, "initial.theta")?;
        check_dim(&initial.theta_hat_i, d, "initial.theta_hat_i")?;
        check_dim(&initial.nu, d, "initial.nu")?;
        if let Some(v) = &initial.x {
            sc.s0.x = v.clone();
        }
        if let Some(v) = &initial.theta {
            sc.s0.theta = v.clone();
        }
        if let Some(v) = &initial.theta_hat_i {
            sc.s0.theta_hat_i = v.clone();
        }
        if let Some(v) = &initial.xi {
            sc.s0.xi = v.clone();
        }
        if let Some(v) = &initial.nu {
            sc.s0.nu = v.clone();
        }
        if initial.identity == Some(true) {
            sc = sc.identity_initialized()?;
        }
    }
    if let Some(over) = &cfg.integration {
        apply_integration_override(&mut sc.integration, over)?;
    }
    if let Some(over) = &cfg.diagnostics {
        apply_diagnostics_override(&mut sc.diagnostics, over);
    }
    if let Some(name) = &cfg.name {
        sc.name = name.clone();
    }
    if let Some(v) = cfg.expect_pe {
        sc.expect_pe = v;
    }
    if let Some(v) = &cfg.pe_note {
        sc.pe_note = Some(v.clone());
    }
    if let Some(v) = &cfg.asserted_assumptions {
        sc.asserted_assumptions = v.clone();
    }

    sc.validate().map_err(|e| match e {
        Error::Schema { .. } => e,
        Error::InvalidConfig { field, message } => schema_err(field, message),
        other => other,
    })?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_resolve() {
        for name in BUILTIN_NAMES {
            let sc = builtin(name).unwrap();
            assert_eq!(sc.name, name);
            sc.validate().unwrap();
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownScenario { .. })));
    }

    #[test]
    fn builtin_assumptions_pass_on_declared_regions() {
        for name in BUILTIN_NAMES {
            let sc = builtin(name).unwrap();
            let verdict = crate::diagnostics::verify_assumptions(&sc.models, &sc.diagnostics);
            for c in &verdict.checks {
                assert!(
                    c.pass,
                    "{name}: check {} failed with {:?} (worst at {:?})",
                    c.name, c.measured, c.worst_state
                );
            }
        }
    }

    #[test]
    fn hopf_dissipation_certificate() {
        // psi psi' = -2 |x|^2 psi^2 along f0, so beta(x) = 2 |x|^2 >= 2 beta_min
        // holds on the annulus |x| >= 0.2 with beta_min = 0.04.
        let sc = builtin("hopf-circle").unwrap();
        for point in sc.diagnostics.sample_region.sweep(64) {
            let f0 = dynamics::f_zero(&sc.models.plant, &sc.models.target, &point).unwrap();
            let psi = (sc.models.target.psi)(&point);
            let lhs = psi * num::dot(&(sc.models.target.grad_psi)(&point), &f0);
            let expect = -2.0 * num::dot(&point, &point) * psi * psi;
            assert!(
                (lhs - expect).abs() <= 1e-9 * (1.0 + expect.abs()),
                "closed form mismatch at {point:?}"
            );
            assert!(lhs <= -2.0 * 0.04 * psi * psi + 1e-8);
        }
    }

    #[test]
    fn hopf_circle_points_are_invariant() {
        let sc = builtin("hopf-circle").unwrap();
        for k in 0..16 {
            let ang = k as f64 * core::f64::consts::PI / 8.0;
            let x = [num::cos(ang), num::sin(ang)];
            let f0 = dynamics::f_zero(&sc.models.plant, &sc.models.target, &x).unwrap();
            let resid = num::dot(&(sc.models.target.grad_psi)(&x), &f0);
            assert!(resid.abs() < 1e-12, "rotation is tangent to the circle");
        }
    }

    #[test]
    fn identity_initialization_sets_estimate_to_truth() {
        for name in BUILTIN_NAMES {
            let sc = builtin(name).unwrap().identity_initialized().unwrap();
            let est = dynamics::theta_hat(
                &sc.models.plant,
                &sc.models.drift,
                &sc.models.target,
                &sc.models.mode,
                &sc.s0.x,
                &sc.s0.xi,
                &sc.s0.theta_hat_i,
            )
            .unwrap();
            for (a, b) in est.iter().zip(&sc.s0.theta) {
                assert!((a - b).abs() < 1e-12, "{name}: {est:?} vs {:?}", sc.s0.theta);
            }
            assert_eq!(sc.s0.x, sc.s0.xi);
            assert_eq!(sc.s0.theta, sc.s0.nu);
        }
    }

    #[test]
    fn config_builtin_with_theta_override() {
        let cfg = ScenarioConfig {
            scenario: Some("scalar-equilibrium".to_string()),
            initial: Some(InitialOverride { theta: Some(vec![3.0]), ..Default::default() }),
            ..Default::default()
        };
        let sc = from_config(&cfg).unwrap();
        assert_eq!(sc.s0.theta, vec![3.0]);
        assert_eq!(sc.s0.x, vec![1.0], "other initial values untouched");
    }

    #[test]
    fn config_indefinite_h_rejected() {
        let cfg = ScenarioConfig {
            scenario: Some("hopf-circle".to_string()),
            drift: Some(DriftConfig {
                h: Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
                ..Default::default()
            }),
            ..Default::default()
        };
        assert!(matches!(from_config(&cfg), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn config_mode_override() {
        let cfg = ScenarioConfig {
            scenario: Some("hopf-circle".to_string()),
            mode: Some("theorem2".to_string()),
            ..Default::default()
        };
        let sc = from_config(&cfg).unwrap();
        assert!(matches!(
            sc.models.mode.variant,
            crate::model::ControllerVariant::Theorem2KappaZero
        ));
    }

    #[test]
    fn config_bad_horizon_names_field() {
        let cfg = ScenarioConfig {
            scenario: Some("scalar-equilibrium".to_string()),
            integration: Some(IntegrationOverride {
                t_end: Some(-5.0),
                ..Default::default()
            }),
            ..Default::default()
        };
        match from_config(&cfg) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "integration.t_end"),
            Err(other) => panic!("expected schema error, got {other:?}"),
            Ok(_) => panic!("expected schema error, got a scenario"),
        }
    }

    #[test]
    fn poly_tables_reproduce_scalar_builtin() {
        // f(x) = x, phi = [x], u0 = -2x, psi = x, varphi = id, kappa = 1.
        let term = |c: f64, p: u32| PolyTerm { c, p: vec![p] };
        let cfg = ScenarioConfig {
            name: Some("scalar-poly".to_string()),
            plant: Some(PlantConfig {
                n: 1,
                m: 1,
                d: 1,
                f: FnSpec::Poly { poly: vec![vec![term(1.0, 1)]] },
                gu: vec![vec![1.0]],
                phi: FnSpec::Poly { poly: vec![vec![term(1.0, 1)]] },
                lipschitz: Some(vec![1.0]),
            }),
            drift: Some(DriftConfig {
                s: Some(FnSpec::Poly { poly: vec![vec![]] }),
                js: Some(FnSpec::PolyMatrix { poly_matrix: vec![vec![vec![]]] }),
                h: Some(vec![vec![1.0]]),
                theta_box: Some(vec![[-4.0, 4.0]]),
            }),
            target: Some(TargetConfig {
                u0: Some(FnSpec::Poly { poly: vec![vec![term(-2.0, 1)]] }),
                psi: Some(FnSpec::Poly { poly: vec![vec![term(1.0, 1)]] }),
                grad_psi: Some(FnSpec::Poly { poly: vec![vec![term(1.0, 0)]] }),
                varphi: Some(FnSpec::Poly { poly: vec![vec![term(1.0, 1)]] }),
                kappa: Some(FnSpec::Poly { poly: vec![vec![term(1.0, 0)]] }),
                beta_min: Some(0.5),
            }),
            initial: Some(InitialOverride {
                x: Some(vec![1.0]),
                theta: Some(vec![2.0]),
                ..Default::default()
            }),
            ..Default::default()
        };
        let poly_sc = from_config(&cfg).unwrap();
        let builtin_sc = builtin("scalar-equilibrium").unwrap();

        let mut cfg_short = IntegrationConfig::fixed(0.0, 2.0, 1e-3);
        cfg_short.log_stride = 10;
        let a = crate::integrate::integrate(&poly_sc.models, &poly_sc.s0, &cfg_short).unwrap();
        let b =
            crate::integrate::integrate(&builtin_sc.models, &builtin_sc.s0, &cfg_short).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert!(
                (a.states[i].x[0] - b.states[i].x[0]).abs() <= 1e-10,
                "poly table diverges from builtin at sample {i}"
            );
            assert!((a.derived[i].theta_hat[0] - b.derived[i].theta_hat[0]).abs() <= 1e-10);
        }
    }

    #[test]
    fn poly_directional_derivative_analytic() {
        // phi(x) = [x0^2, x0 x1]: Dphi[v] = [2 x0 v0, x1 v0 + x0 v1].
        let rows = vec![vec![
            vec![PolyTerm { c: 1.0, p: vec![2, 0] }],
            vec![PolyTerm { c: 1.0, p: vec![1, 1] }],
        ]];
        let dir = poly_matrix_directional(&rows, 1, 2);
        let m = dir(&[3.0, 4.0], &[1.0, 2.0]);
        assert!((m.get(0, 0) - 6.0).abs() < 1e-12);
        assert!((m.get(0, 1) - (4.0 + 6.0)).abs() < 1e-12);
    }

    #[test]
    fn poly_lipschitz_bounds_row_difference() {
        // phi(x) = [x0^2] on segments inside [-2, 2]: |phi(x) - phi(xi)|
        // <= lambda |x - xi| must hold for the estimated modulus.
        let rows = vec![vec![vec![PolyTerm { c: 1.0, p: vec![2] }]]];
        let lip = poly_phi_lipschitz(rows.clone(), 1, 1);
        let phi = poly_matrix_map(rows, 1, 1);
        let mut seed = 7u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..100 {
            let (x, xi) = (vec![rnd()], vec![rnd()]);
            let lam = lip(&x, &xi)[0];
            let diff = (phi(&x).get(0, 0) - phi(&xi).get(0, 0)).abs();
            assert!(diff <= lam * (x[0] - xi[0]).abs() + 1e-12);
        }
    }

    #[test]
    fn named_registry_round_trip() {
        let cfg = ScenarioConfig {
            name: Some("named".to_string()),
            plant: Some(PlantConfig {
                n: 2,
                m: 1,
                d: 2,
                f: FnSpec::Named { name: "hopf-circle.f".to_string() },
                gu: vec![vec![0.0], vec![1.0]],
                phi: FnSpec::Named { name: "hopf-circle.phi".to_string() },
                lipschitz: Some(vec![1.0]),
            }),
            drift: Some(DriftConfig {
                s: Some(FnSpec::Named { name: "hopf-circle-drift.s".to_string() }),
                js: Some(FnSpec::Named { name: "hopf-circle-drift.js".to_string() }),
                h: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                theta_box: Some(vec![[-1.0, 1.0], [-1.0, 1.0]]),
            }),
            target: Some(TargetConfig {
                u0: Some(FnSpec::Named { name: "hopf-circle.u0".to_string() }),
                psi: Some(FnSpec::Named { name: "hopf-circle.psi".to_string() }),
                grad_psi: Some(FnSpec::Named { name: "hopf-circle.grad-psi".to_string() }),
                varphi: Some(FnSpec::Named { name: "identity".to_string() }),
                kappa: Some(FnSpec::Named { name: "hopf-circle.kappa".to_string() }),
                beta_min: Some(0.04),
            }),
            initial: Some(InitialOverride {
                x: Some(vec![2.0, 0.0]),
                theta: Some(vec![0.5, -0.5]),
                ..Default::default()
            }),
            diagnostics: Some(DiagnosticsOverride {
                sample_region: Some(SampleRegion {
                    lo: vec![-3.0, -3.0],
                    hi: vec![3.0, 3.0],
                    min_norm: 0.2,
                }),
                ..Default::default()
            }),
            ..Default::default()
        };
        let sc = from_config(&cfg).unwrap();
        assert_eq!(sc.models.plant.n, 2);
        let a = dynamics::alpha(&sc.models.plant, &[1.0, 0.0]).unwrap();
        assert_eq!(a.data(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn unknown_named_function_is_schema_error() {
        let cfg = ScenarioConfig {
            scenario: Some("hopf-circle".to_string()),
            target: Some(TargetConfig {
                kappa: Some(FnSpec::Named { name: "no-such".to_string() }),
                ..Default::default()
            }),
            ..Default::default()
        };
        match from_config(&cfg) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "target.kappa"),
            Err(other) => panic!("expected schema error, got {other:?}"),
            Ok(_) => panic!("expected schema error, got a scenario"),
        }
    }
}
