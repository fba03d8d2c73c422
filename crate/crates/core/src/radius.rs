//! Choosing the window radius `a` in closed form, via the Lambert W function.
//!
//! For a uniform prior the quantity `e^(-a eps) (a - r) / r` is maximised at
//! `a = 1/eps + r`, which turns the advantage constraint into
//! `eps r e^(eps r) <= s / (e (1 - s))` with `s = r/R + delta`, solved by
//! `eps = W(s / (e (1 - s))) / r`.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{check_positive, CalibrationError, Result};

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_ITER: usize = 100;

/// A Lambert W evaluation together with its defining residual `|w e^w - y|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambertEval {
    pub y: f64,
    pub w: f64,
    pub residual: f64,
}

impl LambertEval {
    fn new(y: f64, w: f64) -> Self {
        Self { y, w, residual: (w * w.exp() - y).abs() }
    }
}

/// Series of either branch around the branch point `y = -1/e`, in terms of
/// `p = +-sqrt(2 (e y + 1))`.
fn branch_point_series(y: f64, sign: f64) -> f64 {
    let p = sign * (2.0 * (E * y + 1.0)).max(0.0).sqrt();
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
}

fn newton<F: Fn(f64, f64) -> f64>(y: f64, mut w: f64, damp: F) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - y;
        let fp = (w + 1.0) * ew;
        if fp == 0.0 {
            break;
        }
        let next = damp(w, w - f / fp);
        let step = (next - w).abs();
        w = next;
        if step <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Principal branch `W_0(y)` for `y >= -1/e`, by Newton's method.
pub fn lambert_w(y: f64) -> Result<f64> {
    Ok(lambert_w_eval(y)?.w)
}

pub fn lambert_w_eval(y: f64) -> Result<LambertEval> {
    if y.is_nan() || y < BRANCH_POINT - 1e-15 {
        return Err(CalibrationError::OutOfDomain(y));
    }
    if y <= BRANCH_POINT {
        return Ok(LambertEval::new(y, -1.0));
    }
    if y == 0.0 {
        return Ok(LambertEval::new(y, 0.0));
    }
    if y == f64::INFINITY {
        return Ok(LambertEval { y, w: f64::INFINITY, residual: 0.0 });
    }
    let start = if y < -0.25 {
        branch_point_series(y, 1.0)
    } else if y > E {
        (1.0 + y).ln()
    } else {
        1.0
    };
    // Damping: a step past the branch point w = -1 is halved towards it.
    let w = newton(y, start, |prev, next| if next <= -1.0 { 0.5 * (prev - 1.0) } else { next });
    Ok(LambertEval::new(y, w))
}

/// Lower branch `W_{-1}(y)` for `-1/e <= y < 0`, by Newton's method.
pub fn lambert_w_minus1(y: f64) -> Result<f64> {
    Ok(lambert_w_minus1_eval(y)?.w)
}

pub fn lambert_w_minus1_eval(y: f64) -> Result<LambertEval> {
    if y.is_nan() || !(BRANCH_POINT - 1e-15..0.0).contains(&y) {
        return Err(CalibrationError::OutOfDomain(y));
    }
    if y <= BRANCH_POINT {
        return Ok(LambertEval::new(y, -1.0));
    }
    let start = if y < -0.25 {
        branch_point_series(y, -1.0)
    } else {
        let l1 = (-y).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    let w = newton(y, start, |prev, next| if next >= -1.0 { 0.5 * (prev - 1.0) } else { next });
    Ok(LambertEval::new(y, w))
}

/// Window radius maximising the posterior of a uniform prior: `1/eps + r`.
pub fn optimal_a_univariate(epsilon: f64, r: f64) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    if !(r >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("radius r = {r} must be non-negative")));
    }
    Ok(1.0 / epsilon + r)
}

/// Posterior bound at the optimal window: `1 / (1 + (e^(eps r + 1) eps r)^-1)`.
pub fn posterior_at_optimal_a(epsilon: f64, r: f64) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    check_positive("radius", r)?;
    let x = epsilon * r;
    Ok(1.0 / (1.0 + 1.0 / ((x + 1.0).exp() * x)))
}

/// Largest epsilon keeping the posterior of a uniform prior below `r/R + delta`.
///
/// Returns `f64::INFINITY` when `r/R + delta >= 1` (the bound is vacuous).
pub fn epsilon_uniform_closed_form(r: f64, range: f64, delta: f64) -> Result<f64> {
    check_positive("radius", r)?;
    check_positive("range", range)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CalibrationError::InvalidArgument(format!("delta = {delta} must lie in (0, 1)")));
    }
    let s = r / range + delta;
    if s >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let argument = s / (E * (1.0 - s));
    Ok(lambert_w(argument)? / r)
}

/// Posterior bound for an `n`-dimensional uniform prior and the window
/// `a = n / eps` that makes `e^(a eps) (r / a)^n` smallest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultidimBound {
    pub posterior: f64,
    pub a: f64,
}

pub fn posterior_bound_multidim(epsilon: f64, r: f64, n: u32) -> Result<MultidimBound> {
    if !(epsilon >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("epsilon = {epsilon} must be non-negative")));
    }
    check_positive("radius", r)?;
    if n == 0 {
        return Err(CalibrationError::InvalidArgument("dimension must be at least 1".into()));
    }
    let n_f = n as f64;
    let posterior = (epsilon * E * r / n_f).powi(n as i32).min(1.0);
    let a = if epsilon == 0.0 { f64::INFINITY } else { n_f / epsilon };
    Ok(MultidimBound { posterior, a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn w_at_simple_points() {
        assert_abs_diff_eq!(lambert_w(E).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(lambert_w(BRANCH_POINT).unwrap(), -1.0, epsilon = 1e-12);
        let w = lambert_w_eval(2.5).unwrap();
        assert!(w.residual <= 1e-12);
        assert!(lambert_w(-0.5).is_err());
    }

    #[test]
    fn w_residuals_on_the_reference_grid() {
        for y in [BRANCH_POINT + 1e-6, 0.0, 0.1, 1.0, E, 10.0, 1e3, -0.3, -0.1, 1e10] {
            let w = lambert_w_eval(y).unwrap();
            assert!(w.residual <= 1e-12 * y.abs().max(1.0), "y = {y}: residual {}", w.residual);
            assert!(w.w >= -1.0);
        }
    }

    #[test]
    fn lower_branch() {
        for y in [BRANCH_POINT + 1e-9, -0.3, -0.2, -0.1, -1e-3, -1e-8, -1e-100] {
            let w = lambert_w_minus1_eval(y).unwrap();
            assert!(w.w <= -1.0, "y = {y}: w = {}", w.w);
            assert!(w.residual <= 1e-12, "y = {y}: residual {}", w.residual);
        }
        // W_{-1}(-ln 2 / 2) = -ln 4
        assert_abs_diff_eq!(
            lambert_w_minus1(-std::f64::consts::LN_2 / 2.0).unwrap(),
            -2.0 * std::f64::consts::LN_2,
            epsilon = 1e-13
        );
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(0.1).is_err());
    }

    #[test]
    fn optimal_radius() {
        assert_eq!(optimal_a_univariate(1.0, 0.5).unwrap(), 1.5);
        assert_eq!(optimal_a_univariate(0.5, 0.0).unwrap(), 2.0);
        assert!(optimal_a_univariate(0.0, 1.0).is_err());
        assert_abs_diff_eq!(posterior_at_optimal_a(1.0, 1.0).unwrap(), 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
    }

    #[test]
    fn uniform_closed_form() {
        // W(0.2 / (0.8 e)) / 10, W evaluated independently with mpmath.
        let eps = epsilon_uniform_closed_form(10.0, 100.0, 0.1).unwrap();
        assert_abs_diff_eq!(eps, 0.008_451_631_579_589_8, epsilon = 1e-12);
        assert_abs_diff_eq!(posterior_at_optimal_a(eps, 10.0).unwrap(), 0.2, epsilon = 1e-12);

        assert_eq!(epsilon_uniform_closed_form(10.0, 100.0, 0.9).unwrap(), f64::INFINITY);

        // s / (e (1 - s)) = e  <=>  s = e^2 / (1 + e^2); then W = 1 and eps = 1 / r.
        let s = E * E / (1.0 + E * E);
        let eps = epsilon_uniform_closed_form(2.0, 20.0, s - 0.1).unwrap();
        assert_abs_diff_eq!(eps, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn multidim_bound() {
        assert_eq!(posterior_bound_multidim(1.0, 1.0 / E, 1).unwrap().posterior, 1.0);
        let b = posterior_bound_multidim(0.5, 0.2, 2).unwrap();
        assert_abs_diff_eq!(b.posterior, (0.5 * E * 0.2 / 2.0f64).powi(2), epsilon = 1e-15);
        assert_eq!(b.a, 4.0);
        assert_eq!(posterior_bound_multidim(0.0, 1.0, 3).unwrap().posterior, 0.0);
    }
}
