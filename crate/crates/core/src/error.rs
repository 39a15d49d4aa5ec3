//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Everything that can go wrong while building models, assembling dynamics,
/// integrating, or running diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix expected to be symmetric is not, within tolerance.
    NotSymmetric { max_asym: f64, tol: f64 },
    /// Cholesky pivot was non-positive: the matrix is not positive definite.
    NotPositiveDefinite { pivot_index: usize, pivot: f64 },
    /// Operand shapes do not agree.
    DimensionMismatch { context: &'static str },
    /// A state or rate component became NaN or infinite.
    NonFiniteState { t: f64 },
    /// The integrator exceeded its step budget.
    MaxStepsExceeded { t: f64, max_steps: usize },
    /// Initial drift parameters lie outside the admissible box.
    OutsideThetaBox { index: usize, value: f64 },
    /// A diagnostic was asked to run over an empty trajectory.
    EmptyTrajectory,
    /// The excitation window does not fit inside the trajectory span.
    WindowTooLong { window: f64, span: f64 },
    /// Too few usable points to fit a decay rate.
    DegenerateSeries { usable: usize },
    /// The requested derived signal does not exist.
    UnknownSignal { name: String },
    /// No builtin scenario under that name.
    UnknownScenario { name: String },
    /// Declarative scenario config failed validation; `path` is the offending
    /// field.
    Schema { path: String, message: String },
    /// A configuration value violated a precondition.
    InvalidConfig { field: &'static str, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotSymmetric { max_asym, tol } => {
                write!(f, "matrix not symmetric: worst asymmetry {max_asym:e} exceeds {tol:e}")
            }
            Error::NotPositiveDefinite { pivot_index, pivot } => write!(
                f,
                "matrix not positive definite: Cholesky pivot {pivot_index} is {pivot:e}"
            ),
            Error::DimensionMismatch { context } => write!(f, "dimension mismatch in {context}"),
            Error::NonFiniteState { t } => write!(f, "non-finite state encountered at t = {t}"),
            Error::MaxStepsExceeded { t, max_steps } => {
                write!(f, "exceeded {max_steps} steps at t = {t}")
            }
            Error::OutsideThetaBox { index, value } => write!(
                f,
                "initial parameter component {index} = {value} outside admissible box"
            ),
            Error::EmptyTrajectory => write!(f, "trajectory holds no samples"),
            Error::WindowTooLong { window, span } => {
                write!(f, "window {window} does not fit in trajectory span {span}")
            }
            Error::DegenerateSeries { usable } => {
                write!(f, "only {usable} usable points; need at least 5")
            }
            Error::UnknownSignal { name } => write!(f, "unknown derived signal '{name}'"),
            Error::UnknownScenario { name } => write!(f, "unknown scenario '{name}'"),
            Error::Schema { path, message } => write!(f, "config error at {path}: {message}"),
            Error::InvalidConfig { field, message } => {
                write!(f, "invalid {field}: {message}")
            }
        }
    }
}

impl core::error::Error for Error {}
