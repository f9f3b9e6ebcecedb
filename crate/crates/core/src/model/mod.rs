//! Domain types and exact evaluation of the model ingredients for one unit.

mod baseline;
mod covariate;
mod family;
mod process;
mod unit;

pub use baseline::{Baseline, HazardFamily};
pub use covariate::CovariatePath;
pub use family::{Derivs, Eta, Link, Modulation, Rho, RhoFn};
pub use process::ModelParams;
pub use unit::{AgeParams, AgePolicy, AgeSegment, Cohort, RiskPiece, UnitPath};
