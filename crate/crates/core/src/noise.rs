//! Noise distributions: Laplace and the generalised Cauchy `C / (1 + |x|^gamma)`.
//!
//! Besides turning epsilon into a Laplace scale, this module answers "how far
//! does the noise stray with probability `p`": the radius `a` with
//! `integral_{-a}^{a} f(x) dx = p`. Laplace has a closed form; the Cauchy
//! family is inverted by bracketing and bisection.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, CalibrationError, Result};

const QUAD_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    GenCauchy {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    4.0
}

/// A noise mechanism: the unit-scale shape plus the scale it is applied with.
///
/// For Laplace the scale is `lambda`; for the Cauchy family it is
/// `xi = c_beta(t) / b`, the noise magnitude of a smooth-sensitivity mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: NoiseKind,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default)]
    pub beta: f64,
    /// Derivative sensitivity at the actual data, supplied by the caller.
    #[serde(default)]
    pub c_t: f64,
}

impl MechanismSpec {
    pub fn laplace(scale: f64) -> Result<Self> {
        check_positive("Laplace scale", scale)?;
        Ok(Self { kind: NoiseKind::Laplace, scale, b: None, beta: 0.0, c_t: 0.0 })
    }

    /// Generalised Cauchy noise for a smooth-sensitivity mechanism with
    /// `b = eps / gamma - beta` and magnitude `xi = c_t / b`.
    pub fn gen_cauchy(gamma: f64, epsilon: f64, beta: f64, c_t: f64) -> Result<Self> {
        GenCauchy::new(gamma)?;
        check_positive("epsilon", epsilon)?;
        check_positive("derivative sensitivity", c_t)?;
        let b = epsilon / gamma - beta;
        if !(b > 0.0) {
            return Err(CalibrationError::InvalidArgument(format!(
                "b = eps / gamma - beta = {b} must be positive"
            )));
        }
        Ok(Self { kind: NoiseKind::GenCauchy { gamma }, scale: c_t / b, b: Some(b), beta, c_t })
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("noise scale", self.scale)?;
        if let NoiseKind::GenCauchy { gamma } = self.kind {
            GenCauchy::new(gamma)?;
        }
        Ok(())
    }

    fn shape(&self) -> Result<Shape> {
        self.validate()?;
        Ok(match self.kind {
            NoiseKind::Laplace => Shape::Laplace,
            NoiseKind::GenCauchy { gamma } => Shape::Cauchy(GenCauchy::new(gamma)?),
        })
    }

    /// Density of the scaled noise at `x`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let s = self.scale;
        Ok(self.shape()?.density(x / s) / s)
    }

    /// Natural log of [`Self::density`], accurate far into the Laplace tail.
    pub fn log_density(&self, x: f64) -> Result<f64> {
        let s = self.scale;
        Ok(match self.shape()? {
            Shape::Laplace => -std::f64::consts::LN_2 - (x / s).abs() - s.ln(),
            Shape::Cauchy(c) => (c.density(x / s) / s).ln(),
        })
    }

    /// Probability that the scaled noise lies in `[-a, a]`.
    pub fn central_mass(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(CalibrationError::InvalidArgument(format!("bound a = {a} must be non-negative")));
        }
        Ok(self.shape()?.central_mass(a / self.scale))
    }

    /// Radius `a` with `Pr[|noise| <= a] = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(scaled_quantile(self.shape()?.quantile(p)?, self.scale))
    }

    /// Non-negative `x` with `density(x) = chi`, or `None` if `chi` exceeds the peak.
    pub fn inverse_density(&self, chi: f64) -> Result<Option<f64>> {
        if !(chi > 0.0) {
            return Err(CalibrationError::InvalidArgument(format!("density level {chi} must be positive")));
        }
        let s = self.scale;
        Ok(self.shape()?.inverse_density(chi * s).map(|x| x * s))
    }

    /// Signed inverse CDF of the scaled noise.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        Ok(inverse_cdf(&self.shape()?, u)? * self.scale)
    }
}

/// Unit-scale generalised Cauchy density `C_gamma / (1 + |x|^gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenCauchy {
    pub gamma: f64,
    pub normalizer: f64,
}

impl GenCauchy {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(CalibrationError::InvalidArgument(format!(
                "Cauchy shape gamma = {gamma} must exceed 1"
            )));
        }
        let normalizer = if gamma == 4.0 {
            SQRT_2 / PI
        } else {
            1.0 / (2.0 * (unit_half_integral(gamma, 1.0) + tail_integral(gamma, 1.0)))
        };
        Ok(Self { gamma, normalizer })
    }

    pub fn density(&self, x: f64) -> f64 {
        self.normalizer / (1.0 + x.abs().powf(self.gamma))
    }

    /// `Pr[|x| <= a]`.
    pub fn central_mass(&self, a: f64) -> f64 {
        if a == f64::INFINITY {
            return 1.0;
        }
        let half = if self.gamma == 4.0 {
            quartic_antiderivative(a)
        } else if a <= 1.0 {
            unit_half_integral(self.gamma, a)
        } else {
            unit_half_integral(self.gamma, 1.0) + tail_integral(self.gamma, 1.0)
                - tail_integral(self.gamma, a)
        };
        (2.0 * self.normalizer * half).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_mass(p)?;
        if p == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.central_mass(hi) < p {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(CalibrationError::InvalidArgument(format!("no finite quantile for p = {p}")));
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.central_mass(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn inverse_density(&self, chi: f64) -> Option<f64> {
        let ratio = self.normalizer / chi;
        (ratio >= 1.0).then(|| (ratio - 1.0).powf(1.0 / self.gamma))
    }
}

/// `integral_0^a dx / (1 + x^gamma)` for `a <= 1`.
fn unit_half_integral(gamma: f64, a: f64) -> f64 {
    quadrature::integrate(|x| 1.0 / (1.0 + x.powf(gamma)), 0.0, a, QUAD_TOL).integral
}

/// `integral_a^inf dx / (1 + x^gamma)` for `a >= 1`.
///
/// With `x = v^(-1/(gamma-1))` the integrand becomes the bounded
/// `m / (1 + v^(gamma m))`, `m = 1/(gamma-1)`, on `[0, a^(1-gamma)]`; the plain
/// `u = 1/x` substitution leaves a singularity at 0 when `gamma < 2`.
fn tail_integral(gamma: f64, a: f64) -> f64 {
    let m = 1.0 / (gamma - 1.0);
    let upper = a.powf(1.0 - gamma);
    quadrature::integrate(|v| m / (1.0 + v.powf(gamma * m)), 0.0, upper, QUAD_TOL).integral
}

/// Closed-form `integral_0^a dx / (1 + x^4)`.
fn quartic_antiderivative(a: f64) -> f64 {
    let s = SQRT_2 * a;
    let log_term = ((a * a + s + 1.0) / (a * a - s + 1.0)).ln();
    let atan_term = 2.0 * ((s + 1.0).atan() + (s - 1.0).atan());
    (log_term + atan_term) / (4.0 * SQRT_2)
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Laplace,
    Cauchy(GenCauchy),
}

impl Shape {
    fn density(&self, x: f64) -> f64 {
        match self {
            Shape::Laplace => 0.5 * (-x.abs()).exp(),
            Shape::Cauchy(c) => c.density(x),
        }
    }

    fn central_mass(&self, a: f64) -> f64 {
        match self {
            Shape::Laplace => -(-a).exp_m1(),
            Shape::Cauchy(c) => c.central_mass(a),
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Shape::Laplace => laplace_quantile(p, 1.0),
            Shape::Cauchy(c) => c.quantile(p),
        }
    }

    fn inverse_density(&self, chi: f64) -> Option<f64> {
        match self {
            Shape::Laplace => (chi <= 0.5).then(|| -(2.0 * chi).ln()),
            Shape::Cauchy(c) => c.inverse_density(chi),
        }
    }
}

fn inverse_cdf(shape: &Shape, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(CalibrationError::InvalidArgument(format!("u = {u} must lie in (0, 1)")));
    }
    let central = (2.0 * u - 1.0).abs();
    let a = if central == 0.0 { 0.0 } else { shape.quantile(central)? };
    Ok(if u < 0.5 { -a } else { a })
}

fn check_mass(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(CalibrationError::InvalidArgument(format!("probability p = {p} must lie in [0, 1)")));
    }
    Ok(())
}

/// Laplace scale `sensitivity / eps`; infinite when `eps = 0`.
pub fn laplace_scale(epsilon: f64, sensitivity: f64) -> Result<f64> {
    check_positive("sensitivity", sensitivity)?;
    if !(epsilon >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("epsilon = {epsilon} must be non-negative")));
    }
    if epsilon == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sensitivity / epsilon)
}

/// `-ln(1 - p) / eps`: Laplace noise with rate `eps` stays in `[-a, a]` with probability `p`.
pub fn laplace_quantile(p: f64, epsilon: f64) -> Result<f64> {
    check_mass(p)?;
    check_positive("epsilon", epsilon)?;
    Ok(-(-p).ln_1p() / epsilon)
}

/// Radius `a` with `Pr[|eta| <= a] = p` for unit generalised Cauchy noise.
pub fn cauchy_quantile(p: f64, gamma: f64) -> Result<f64> {
    GenCauchy::new(gamma)?.quantile(p)
}

/// The same probability bound for noise scaled by `xi`.
pub fn scaled_quantile(a: f64, xi: f64) -> f64 {
    a * xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn laplace_scales() {
        assert_abs_diff_eq!(laplace_scale(0.539, 1.0).unwrap(), 1.855, epsilon = 1e-3);
        assert_abs_diff_eq!(laplace_scale(0.402, 1.0).unwrap(), 2.4876, epsilon = 1e-4);
        assert_eq!(laplace_scale(1.25, 1.0).unwrap(), 0.8);
        assert_eq!(laplace_scale(0.0, 1.0).unwrap(), f64::INFINITY);
        assert!(laplace_scale(1.0, 0.0).is_err());
    }

    #[test]
    fn laplace_quantiles() {
        assert_abs_diff_eq!(laplace_quantile(1.0 - (-1.0f64).exp(), 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laplace_quantile(0.95, 2.0).unwrap(), 20f64.ln() / 2.0, epsilon = 1e-14);
        assert_eq!(laplace_quantile(0.0, 1.0).unwrap(), 0.0);
        assert!(laplace_quantile(1.0, 1.0).is_err());
    }

    #[test]
    fn quartic_closed_form_matches_quadrature() {
        for a in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let q = quadrature::integrate(|x| 1.0 / (1.0 + x.powi(4)), 0.0, a, 1e-14).integral;
            assert_abs_diff_eq!(quartic_antiderivative(a), q, epsilon = 1e-12);
        }
    }

    #[test]
    fn cauchy_constant() {
        let c = GenCauchy::new(4.0).unwrap();
        assert_abs_diff_eq!(c.central_mass(1.0), 0.780_549_926_169_590, epsilon = 1e-12);
        let a = cauchy_quantile(c.central_mass(1.0), 4.0).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cauchy_quantile(0.78, 4.0).unwrap(), 1.0, epsilon = 1e-2);
    }

    #[test]
    fn normalizer_matches_closed_form() {
        for gamma in [1.5, 2.0, 3.0, 4.0, 6.0] {
            let c = GenCauchy::new(gamma).unwrap();
            let closed = gamma * (PI / gamma).sin() / (2.0 * PI);
            assert_abs_diff_eq!(c.normalizer, closed, epsilon = 1e-10);
        }
        assert!(GenCauchy::new(1.0).is_err());
    }

    #[test]
    fn quantiles_increase() {
        assert!(cauchy_quantile(0.999, 4.0).unwrap() > cauchy_quantile(0.99, 4.0).unwrap());
        let mut last = 0.0;
        for i in 1..10 {
            let a = cauchy_quantile(i as f64 / 10.0, 2.5).unwrap();
            assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn scaled_mechanism_round_trips() {
        let m = MechanismSpec::laplace(2.0).unwrap();
        let a = m.quantile(0.9).unwrap();
        assert_abs_diff_eq!(m.central_mass(a).unwrap(), 0.9, epsilon = 1e-14);
        let x = m.inverse_density(m.density(3.0).unwrap()).unwrap().unwrap();
        assert_abs_diff_eq!(x, 3.0, epsilon = 1e-12);
        assert_eq!(m.inverse_density(1.0).unwrap(), None);

        let c = MechanismSpec::gen_cauchy(4.0, 1.0, 0.05, 2.0).unwrap();
        assert_abs_diff_eq!(c.scale, 2.0 / 0.2, epsilon = 1e-12);
        let x = c.inverse_density(c.density(7.0).unwrap()).unwrap().unwrap();
        assert_abs_diff_eq!(x, 7.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.inverse_cdf(0.5).unwrap(), 0.0);
        assert!(c.inverse_cdf(0.9).unwrap() > 0.0);
        assert!(MechanismSpec::gen_cauchy(4.0, 0.1, 0.05, 1.0).is_err());
    }
}
