//! Simulation and semiparametric estimation for general dynamic
//! recurrent-event models.
//!
//! A unit's intensity at calendar time `s` is
//! `Y(s) lambda0(E(s)) rho(s, N(s-); alpha) psi(X(s) beta)`, where `E` is the
//! effective age process. The crate evaluates the doubly-indexed processes of
//! this model, simulates cohorts from it, fits `(alpha, beta)` by profile
//! partial likelihood together with the baseline cumulative hazard, and
//! provides plug-in variance estimators and a Monte Carlo harness.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod mc;
pub mod model;
pub mod quad;
pub mod simulate;
pub mod step;

pub use error::{Error, Result};
pub use step::StepFunction;
