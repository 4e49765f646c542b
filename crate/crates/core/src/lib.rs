//! Least concave majorants of cumulative estimators and the distance between
//! the two.
//!
//! * [`stepfn`]: step functions, majorants (upper hulls), gaps and left
//!   derivatives.
//! * [`processes`]: Brownian paths, the drifted process `W(t) - t^2` and its
//!   gap process `ζ`, and the Brownian version of a cumulative estimator.
//! * [`models`]: monotone density and regression models, naive cumulative
//!   estimators, Grenander-type estimators and the inverse process.
//! * [`asymptotics`]: scaling constants, Monte Carlo moments of `ζ` and the
//!   asymptotic mean and variance of the `L_p` distance.
//! * [`experiments`]: replicated experiments with pass/fail checks.

pub mod asymptotics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod models;
pub mod processes;
pub mod quadrature;
pub mod stats;
pub mod stepfn;

pub use error::{Error, Result};
