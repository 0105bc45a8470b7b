//! Estimation of the index vector in the monotone single index model
//! `Y = psi0(alpha0' X) + eps`, with `psi0` nondecreasing and `|alpha0| = 1`.
//!
//! The crate provides six estimators of `alpha0`:
//!
//! - profile least squares ([`estimators::estimate_lse`]),
//! - the simple and efficient score estimators ([`estimators::estimate_sse`],
//!   [`estimators::estimate_ese`]), built on the isotonic link fit,
//! - the penalized least squares estimator ([`estimators::estimate_plse`]),
//!   built on a natural cubic smoothing spline,
//! - the link-free linear estimator ([`estimators::estimate_linear`]),
//! - the maximum rank correlation estimator ([`estimators::estimate_mre`]).
//!
//! The score-type estimators search for a zero of a projected score vector
//! by minimizing its Euclidean norm over `alpha` with derivative-free
//! methods ([`search`]). Limiting covariance matrices for the cubic-normal
//! simulation model are in [`asymptotics`], and [`sim`] runs seeded
//! replication studies.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod isotonic;
pub mod kernel;
pub mod model;
pub mod rng;
pub mod score;
pub mod search;
pub mod sim;
pub mod spline;

pub use error::{Error, Result};
pub use estimators::{EstimateResult, EstimatorKind, LinkFit};
pub use isotonic::StepFunction;
pub use model::{ModelSpec, Sample};
pub use spline::SplineFit;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `v / |v|`, or `None` when the norm is not a positive finite number.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let nrm = norm2(v);
    if nrm.is_finite() && nrm > 0.0 {
        Some(v.iter().map(|x| x / nrm).collect())
    } else {
        None
    }
}
