//! Magic and entanglement of a CP-phase family of two-spin states, with a
//! Monte Carlo pipeline for collider-style sensitivity estimates.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod magic;
pub mod montecarlo;
pub mod qi_measures;
pub mod sensitivity;
pub mod spinstate;

pub use error::{Error, Result};
