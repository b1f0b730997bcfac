//! Pseudo-spectral simulation and analysis toolkit for the dissipative
//! surface quasi-geostrophic equation on a periodic box, with fractional
//! dissipation exponent `alpha` in `[1, 2]`.
//!
//! The crate is organized as a stack:
//!
//! * [`spectral`] — grids, transforms, multipliers, Riesz velocity, dealiasing;
//! * [`kernel`] — the fractional heat kernel and its closed forms;
//! * [`quadrature`] — Gauss–Legendre panels and log-log slope fits;
//! * [`solver`] — integrating-factor RK4 time stepper;
//! * [`asymptotics`] — large-time approximants and the quadratic correction;
//! * [`analysis`] — norms, Littlewood–Paley energies, decay-rate fits;
//! * [`optimality`] — frequency-cone data and lower-bound experiments;
//! * [`harness`] — experiment drivers, configs, and file formats.

// Domain guards are written as negated comparisons (`!(t > 1.0)`) on
// purpose: unlike `t <= 1.0`, the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod asymptotics;
pub mod data;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod optimality;
pub mod quadrature;
pub mod solver;
pub mod spectral;

mod cutoff;

pub use error::{Result, SqgError};
