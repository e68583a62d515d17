//! Two-component symmetric Gaussian mixtures whose hidden labels follow an Ising or
//! Curie-Weiss law: samplers, estimators, limiting-variance theory and a Monte Carlo harness.

pub mod auxfield;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod gmm;
pub mod labels;
pub mod numeric;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
