//! Simulation and verification toolkit for adaptive regulation to invariant
//! sets.
//!
//! The crate assembles the full closed loop for plants of the form
//! `x' = f(x) + Gu (phi(x) theta + u)` with drifting parameters
//! `theta' = S(theta)`: a finite-form adaptation law, an embedding observer
//! that replaces the plant state inside the regressor, and a combined system
//! with bookkeeping error integrals. Trajectories produced by the integrator
//! feed post-hoc diagnostics that turn the construction's stability devices
//! (Lyapunov traces, L2 memberships, excitation Gramians, standing-assumption
//! inequalities) into machine-checkable verdicts.
//!
//! The crate is `no_std` with `alloc`; file formats and the command-line
//! front end live in the companion `regsim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod num;
pub mod quad;
pub mod scenario;

pub use error::Error;
pub use linalg::Matrix;
pub use model::{ControllerMode, DriftModel, Models, PlantModel, SimState, TargetSpec};
