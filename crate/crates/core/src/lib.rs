//! Calibration of differential privacy from a bound on an attacker's guessing advantage.
//!
//! Given a prior over sensitive attributes and a bound `delta` on how much an
//! attacker's probability of guessing them may grow after seeing a query
//! result, the crate computes the largest `epsilon` (and thus the smallest
//! noise) that keeps the advantage below `delta`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod bridge;
pub mod composition;
pub mod error;
pub mod multivariate;
pub mod noise;
pub mod oracle;
pub mod priors;
pub mod radius;

pub use advantage::{
    epsilon_one_sided, epsilon_two_sided, posterior_upper_bound, scan_window, BindingSide,
    CalibrationInput, EpsilonResult, ScanOutcome,
};
pub use error::{CalibrationError, Result};
pub use multivariate::{Combinator, Norm, SensitiveItem, SensitiveSet};
pub use noise::{MechanismSpec, NoiseKind};
pub use priors::{Location, Prior, WindowMass};

/// Absolute tolerance for comparisons between probabilities.
pub const PROB_TOL: f64 = 1e-12;
