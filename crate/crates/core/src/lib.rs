//! Non-asymptotic confidence bounds for MCMC empirical averages.
//!
//! The crate is organised in layers:
//!
//! * [`chain`]: the [`Kernel`](chain::Kernel) abstraction, seeded single and
//!   parallel chain drivers, burn-in and subsampling of traces.
//! * [`spin`]: Curie-Weiss and periodic Ising models with Glauber (random and
//!   systematic scan) and Metropolis spin-flip kernels.
//! * [`dag`]: Bayesian model averaging over DAG structures on binary data
//!   with an add/remove-edge Metropolis-Hastings chain.
//! * [`estimators`]: trace-based estimates of the variance, asymptotic
//!   variance, spectral gap and mixing time.
//! * [`bounds`]: Chebyshev and Bernstein tail bounds, burn-in error terms,
//!   estimator error bounds and analytic gap formulas.
//! * [`harness`]: experiment configuration, empirical log-tails and output
//!   files used by the command line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chain;
pub mod dag;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numeric;
pub mod rng;
pub mod spin;

pub use error::{Error, Result};
