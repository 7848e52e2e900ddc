//! Thermodynamic formalism for expanding interval maps and their suspension
//! flows: pressure, transfer operators, Dolgopyat-type cancellation
//! estimates, closed-orbit counting and correlation decay.

pub mod config;
pub mod correlations;
pub mod dolgopyat;
pub mod error;
pub mod expr;
pub mod field;
pub mod orbits;
pub mod ruelle;
pub mod symbolic;
pub mod thermo;

pub use error::{Error, Result};
