//! Seeded Monte Carlo and MCMC toolkit: samplers, target densities,
//! importance sampling, evidence estimators, Metropolis–Hastings and slice
//! kernels, and an experiment harness that renders convergence envelopes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod distributions;
mod error;
pub mod estimators;
pub mod evidence;
pub mod harness;
pub mod mcmc;
pub mod quadrature;
pub mod rng;
pub mod slice;
pub mod special;
pub mod targets;

pub use error::{Error, Result};
pub use rng::RngStream;
