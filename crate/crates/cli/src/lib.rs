//! Calibrate DP noise to a bound on an attacker's guessing advantage.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod bridge;
pub mod calibrate;
pub mod doc;
pub mod error;
pub mod render;
pub mod verify;
