//! Prior beliefs over a single attribute (or a pre-correlated attribute group).
//!
//! Every prior exposes the window-mass function `g(z) = Pr[d(x, t) <= z]`,
//! the probability that the attribute lies within distance `z` of the target
//! `t`. Discrete priors use the unit metric: distinct labels are at distance 1.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{check_open_unit, check_positive, CalibrationError, Result};
use crate::PROB_TOL;

/// How the distance bound `R` of a normal prior is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    /// `R = mu + 3 * sqrt(2) * sigma`, covering `erf(3)` of the mass.
    #[default]
    ThreeSigmaSqrt2,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    /// Uniform on `[start, start + length]`.
    Uniform {
        #[serde(default)]
        start: f64,
        length: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
        #[serde(default)]
        range: RangePolicy,
    },
    /// Labelled point masses under the unit metric.
    Discrete { points: Vec<(String, f64)> },
    /// Unknown distribution of which only the window mass `q` is known.
    WorstCase { q: f64 },
}

/// Where the attacker's target sits: a coordinate or a discrete label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Location {
    Value(f64),
    Label(String),
}

impl Location {
    pub fn as_value(&self) -> Option<f64> {
        match self {
            Location::Value(v) => Some(*v),
            Location::Label(_) => None,
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Value(v) => write!(f, "{v}"),
            Location::Label(l) => f.write_str(l),
        }
    }
}

/// Prior mass of the correct-guess ball (`p = g(r)`) and of the window (`q = g(a)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowMass {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub a: f64,
}

impl WindowMass {
    pub fn new(p: f64, q: f64, r: f64, a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || p > q + PROB_TOL {
            return Err(CalibrationError::InvalidArgument(format!(
                "window masses must satisfy 0 <= p <= q <= 1 (p = {p}, q = {q})"
            )));
        }
        if !(r >= 0.0) || r > a {
            return Err(CalibrationError::InvalidArgument(format!(
                "radii must satisfy 0 <= r <= a (r = {r}, a = {a})"
            )));
        }
        Ok(Self { p, q, r, a })
    }
}

/// `g(z)` for a uniform prior of length `R`: `min(2z / R, 1)`.
///
/// The target location does not enter; targets near the boundary are handled
/// by widening the window with [`corner_adjust`].
pub fn window_mass_uniform(range: f64, _t: f64, z: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(CalibrationError::InvalidPrior(format!(
            "uniform length must be positive, got {range}"
        )));
    }
    if !(z >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "radius must be non-negative, got {z}"
        )));
    }
    Ok((2.0 * z / range).min(1.0))
}

/// Doubles a window radius so that a target sitting in a corner of the space
/// still admits neighbours up to distance `2a` without changing the exponent.
pub fn corner_adjust(a: f64) -> f64 {
    2.0 * a
}

/// `g(z)` for a normal prior: the mass of `[t - z, t + z]`.
pub fn window_mass_normal(mu: f64, sigma: f64, t: f64, z: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(CalibrationError::InvalidPrior(format!(
            "normal sigma must be positive, got {sigma}"
        )));
    }
    if !(z >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "radius must be non-negative, got {z}"
        )));
    }
    let scale = sigma * SQRT_2;
    let mass = (erf((t + z - mu) / scale) - erf((t - z - mu) / scale)) / 2.0;
    Ok(mass.clamp(0.0, 1.0))
}

/// Default distance bound for a normal prior, `mu + 3 * sqrt(2) * sigma`.
pub fn default_range_normal(mu: f64, sigma: f64) -> f64 {
    mu + 3.0 * SQRT_2 * sigma
}

/// The prior that requires the most noise when the window is the whole space:
/// `(1 - delta) / 2`.
pub fn worst_case_prior(delta: f64) -> Result<f64> {
    check_open_unit("delta", delta)?;
    Ok((1.0 - delta) / 2.0)
}

/// Stationary prior for a window of mass `q`, in the closed form
/// `(delta (1 - delta) + q (1 - q)) / (2 (delta + q - 1))`.
///
/// At `q = 1` this is exactly [`worst_case_prior`]. For `q < 1` the expression
/// does not locate the minimiser of the windowed epsilon; use
/// [`windowed_stationary_prior`] for that.
pub fn worst_case_prior_windowed(delta: f64, q: f64) -> Result<f64> {
    check_open_unit("delta", delta)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "window mass q = {q} must lie in (0, 1]"
        )));
    }
    let denom = 2.0 * (delta + q - 1.0);
    if denom <= 0.0 {
        return Err(CalibrationError::NoStationaryPoint(delta + q));
    }
    if q == 1.0 {
        return worst_case_prior(delta);
    }
    Ok((delta * (1.0 - delta) + q * (1.0 - q)) / denom)
}

/// The prior `p` that minimises the windowed epsilon
/// `-ln(p / (q - p) * (1 / (delta + p) - 1))`.
///
/// Setting the derivative to zero gives `(1 - q) p^2 - 2 q delta p + q delta (1 - delta) = 0`;
/// the smaller root lies inside `(0, min(q, 1 - delta))`. Real roots exist iff
/// `delta + q > 1`; otherwise epsilon decreases towards infeasibility as `p -> q`.
pub fn windowed_stationary_prior(delta: f64, q: f64) -> Result<f64> {
    check_open_unit("delta", delta)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "window mass q = {q} must lie in (0, 1]"
        )));
    }
    if delta + q <= 1.0 {
        return Err(CalibrationError::NoStationaryPoint(delta + q));
    }
    if q == 1.0 {
        return worst_case_prior(delta);
    }
    let half_b = q * delta;
    let disc = half_b * half_b - (1.0 - q) * q * delta * (1.0 - delta);
    // disc > 0 whenever delta + q > 1; written as c / (half_b + sqrt) to avoid cancellation.
    let c = q * delta * (1.0 - delta);
    Ok(c / (half_b + disc.max(0.0).sqrt()))
}

/// Candidate priors nearest to the worst case from below and above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteWorstCase {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl DiscreteWorstCase {
    pub fn candidates(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.left.iter().chain(self.right.iter()).copied().collect();
        out.dedup();
        out
    }
}

/// Picks the masses closest to `(1 - delta) / 2` from the left and from the right.
///
/// The one-sided epsilon is unimodal in `p` with its minimum at the worst-case
/// prior, so these two candidates are the only ones worth evaluating.
pub fn worst_discrete_prior(masses: &[f64], delta: f64) -> Result<DiscreteWorstCase> {
    if masses.is_empty() {
        return Err(CalibrationError::InvalidPrior("empty set of prior masses".into()));
    }
    if let Some(m) = masses.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(CalibrationError::InvalidPrior(format!("mass {m} is not a probability")));
    }
    let target = worst_case_prior(delta)?;
    let left = masses
        .iter()
        .copied()
        .filter(|&m| m <= target)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));
    let right = masses
        .iter()
        .copied()
        .filter(|&m| m >= target)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
    Ok(DiscreteWorstCase { left, right })
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::Uniform { start, length } => {
                if !start.is_finite() || !(*length > 0.0) || !length.is_finite() {
                    return Err(CalibrationError::InvalidPrior(format!(
                        "uniform prior needs a finite start and positive length (got {start}, {length})"
                    )));
                }
            }
            Prior::Normal { mu, sigma, range } => {
                if !mu.is_finite() || !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(CalibrationError::InvalidPrior(format!(
                        "normal prior needs finite mu and positive sigma (got {mu}, {sigma})"
                    )));
                }
                if let RangePolicy::Explicit(r) = range {
                    check_positive("normal range", *r)?;
                }
            }
            Prior::Discrete { points } => {
                if points.is_empty() {
                    return Err(CalibrationError::InvalidPrior("discrete prior has no points".into()));
                }
                let mut total = 0.0;
                for (label, mass) in points {
                    if !(0.0..=1.0).contains(mass) {
                        return Err(CalibrationError::InvalidPrior(format!(
                            "mass of `{label}` is {mass}, not a probability"
                        )));
                    }
                    total += mass;
                }
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(CalibrationError::InvalidPrior(format!(
                        "discrete masses sum to {total}, expected 1"
                    )));
                }
                let mut labels: Vec<&str> = points.iter().map(|(l, _)| l.as_str()).collect();
                labels.sort_unstable();
                if labels.windows(2).any(|w| w[0] == w[1]) {
                    return Err(CalibrationError::InvalidPrior("duplicate discrete label".into()));
                }
            }
            Prior::WorstCase { q } => {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(CalibrationError::InvalidPrior(format!(
                        "worst-case window mass q = {q} must lie in (0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Prior::Discrete { .. })
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Prior::Uniform { .. } | Prior::Normal { .. })
    }

    /// The distance bound `R` implied by the prior itself, if any.
    pub fn default_range(&self) -> Option<f64> {
        match self {
            Prior::Uniform { length, .. } => Some(*length),
            Prior::Normal { mu, sigma, range } => Some(match range {
                RangePolicy::ThreeSigmaSqrt2 => default_range_normal(*mu, *sigma),
                RangePolicy::Explicit(r) => *r,
            }),
            Prior::Discrete { .. } => Some(1.0),
            Prior::WorstCase { .. } => None,
        }
    }

    pub fn mass_of(&self, label: &str) -> Option<f64> {
        match self {
            Prior::Discrete { points } => points.iter().find(|(l, _)| l == label).map(|(_, m)| *m),
            _ => None,
        }
    }

    /// `g(z)` around the target `t`.
    pub fn window_mass(&self, t: &Location, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(CalibrationError::InvalidArgument(format!(
                "radius must be non-negative, got {z}"
            )));
        }
        match self {
            Prior::Uniform { length, .. } => {
                window_mass_uniform(*length, t.as_value().unwrap_or_default(), z)
            }
            Prior::Normal { mu, sigma, .. } => {
                let tv = t.as_value().ok_or_else(|| {
                    CalibrationError::InvalidArgument(format!("normal prior needs a numeric target, got `{t}`"))
                })?;
                window_mass_normal(*mu, *sigma, tv, z)
            }
            Prior::Discrete { .. } => {
                let label = match t {
                    Location::Label(l) => l.clone(),
                    Location::Value(v) => v.to_string(),
                };
                let mass = self.mass_of(&label).ok_or_else(|| {
                    CalibrationError::InvalidArgument(format!("unknown discrete label `{label}`"))
                })?;
                Ok(if z < 1.0 { mass } else { 1.0 })
            }
            Prior::WorstCase { .. } => Err(CalibrationError::Unsupported(
                "a worst-case prior has no window-mass function; use window_masses".into(),
            )),
        }
    }

    /// Prior masses `(p, q)` for a correct-guess radius `r` and window `a`.
    ///
    /// For [`Prior::WorstCase`] the target mass is the minimiser of epsilon over
    /// all priors compatible with the known window mass.
    pub fn window_masses(&self, t: &Location, r: f64, a: f64, delta: f64) -> Result<WindowMass> {
        match self {
            Prior::WorstCase { q } => {
                let p = windowed_stationary_prior(delta, *q)?;
                WindowMass::new(p, *q, r, a.max(r))
            }
            _ => {
                let p = self.window_mass(t, r)?;
                let q = self.window_mass(t, a)?;
                WindowMass::new(p, q.max(p), r, a)
            }
        }
    }

    /// Cumulative distribution function for the continuous variants.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match self {
            Prior::Uniform { start, length } => Some(((x - start) / length).clamp(0.0, 1.0)),
            Prior::Normal { mu, sigma, .. } => {
                Some((0.5 * (1.0 + erf((x - mu) / (sigma * SQRT_2)))).clamp(0.0, 1.0))
            }
            _ => None,
        }
    }

    /// Location whose correct-guess mass `g(r)` is closest to `(1 - delta) / 2`.
    ///
    /// Uniform priors give the same mass everywhere (the midpoint is returned),
    /// normal priors are searched along `t >= mu` where `g` decreases.
    pub fn worst_case_location(&self, r: f64, delta: f64) -> Result<Location> {
        let target = worst_case_prior(delta)?;
        match self {
            Prior::Uniform { start, length } => Ok(Location::Value(start + length / 2.0)),
            Prior::Normal { mu, sigma, .. } => {
                let at_mode = window_mass_normal(*mu, *sigma, *mu, r)?;
                if at_mode <= target {
                    return Ok(Location::Value(*mu));
                }
                let (mut lo, mut hi) = (*mu, mu + r + 12.0 * sigma);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if window_mass_normal(*mu, *sigma, mid, r)? > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
                        break;
                    }
                }
                Ok(Location::Value(0.5 * (lo + hi)))
            }
            Prior::Discrete { .. } | Prior::WorstCase { .. } => Err(CalibrationError::Unsupported(
                "worst-case location is only defined for continuous priors".into(),
            )),
        }
    }

    /// The same prior expressed in units multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Prior> {
        check_positive("scale factor", factor)?;
        Ok(match self {
            Prior::Uniform { start, length } => Prior::Uniform {
                start: start * factor,
                length: length * factor,
            },
            Prior::Normal { mu, sigma, range } => Prior::Normal {
                mu: mu * factor,
                sigma: sigma * factor,
                range: match range {
                    RangePolicy::ThreeSigmaSqrt2 => RangePolicy::ThreeSigmaSqrt2,
                    RangePolicy::Explicit(r) => RangePolicy::Explicit(r * factor),
                },
            },
            Prior::WorstCase { q } => Prior::WorstCase { q: *q },
            Prior::Discrete { .. } => {
                return Err(CalibrationError::Unsupported(
                    "discrete priors live in the unit metric and cannot be rescaled".into(),
                ))
            }
        })
    }
}
