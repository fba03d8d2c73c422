//! Brute-force Bayesian verifier for small discrete input spaces.
//!
//! The attacker knows the prior, the query and the noise distribution, sees
//! one noisy output `y`, and computes the exact posterior of the target set.
//! Sweeping `y` over a fine grid gives the largest advantage the attacker can
//! ever get, which must stay below the `delta` the engine calibrated for.

use serde::Serialize;

use crate::error::{check_positive, CalibrationError, Result};
use crate::noise::MechanismSpec;
use crate::priors::{Location, Prior};

/// Allowance for the output grid missing the true supremum.
pub const GRID_SLACK: f64 = 3e-3;
/// The grid extends this many noise scales past the extreme query outputs.
pub const GRID_SPAN_SCALES: f64 = 10.0;
/// Grid points per noise scale.
pub const GRID_STEPS_PER_SCALE: f64 = 50.0;
pub const MIN_BINS: usize = 10;

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePoint {
    pub label: Location,
    pub mass: f64,
    /// The query evaluated at this input.
    pub output: f64,
    pub target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteScenario {
    pub points: Vec<OraclePoint>,
    pub mech: MechanismSpec,
}

impl DiscreteScenario {
    pub fn new(points: Vec<OraclePoint>, mech: MechanismSpec) -> Result<Self> {
        mech.validate()?;
        if points.is_empty() {
            return Err(CalibrationError::InvalidPrior("scenario has no points".into()));
        }
        if let Some(p) = points.iter().find(|p| !(p.mass >= 0.0) || !p.output.is_finite()) {
            return Err(CalibrationError::InvalidPrior(format!(
                "point {} has mass {} and output {}",
                p.label, p.mass, p.output
            )));
        }
        let total: f64 = points.iter().map(|p| p.mass).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(CalibrationError::InvalidPrior(format!("masses sum to {total}, not 1")));
        }
        let targets = points.iter().filter(|p| p.target).count();
        if targets == 0 || targets == points.len() {
            return Err(CalibrationError::InvalidArgument(
                "the target set must be non-empty and leave some point out".into(),
            ));
        }
        Ok(Self { points, mech })
    }

    /// Build from a discrete prior, a query over its labels and the labels that
    /// count as a correct guess.
    pub fn from_prior<F: Fn(&str) -> f64>(
        prior: &Prior,
        query: F,
        targets: &[&str],
        mech: MechanismSpec,
    ) -> Result<Self> {
        let Prior::Discrete { points } = prior else {
            return Err(CalibrationError::Unsupported(
                "only discrete priors can be enumerated; discretize continuous ones first".into(),
            ));
        };
        if let Some(missing) = targets.iter().find(|t| !points.iter().any(|(l, _)| l == *t)) {
            return Err(CalibrationError::InvalidArgument(format!("unknown target label `{missing}`")));
        }
        let points = points
            .iter()
            .map(|(label, mass)| OraclePoint {
                label: Location::Label(label.clone()),
                mass: *mass,
                output: query(label),
                target: targets.contains(&label.as_str()),
            })
            .collect();
        Self::new(points, mech)
    }

    /// Prior probability of the target set, summed the same way as the posterior.
    pub fn prior(&self) -> f64 {
        let (target, total) = self.weighted_sums(std::iter::repeat(1.0));
        target / total
    }

    fn weighted_sums(&self, weights: impl Iterator<Item = f64>) -> (f64, f64) {
        self.points.iter().zip(weights).fold((0.0, 0.0), |(target, total), (p, weight)| {
            let w = p.mass * weight;
            (if p.target { target + w } else { target }, total + w)
        })
    }

    fn is_constant(&self) -> bool {
        !self.mech.scale.is_finite()
    }
}

/// Exact posterior of the target set after observing `y`.
///
/// Likelihoods are combined in log space relative to the largest one, so a
/// mechanism with infinite scale (constant output) returns the prior exactly.
pub fn posterior_at_output(s: &DiscreteScenario, y: f64) -> Result<f64> {
    if s.is_constant() {
        return Ok(s.prior());
    }
    let logs = s
        .points
        .iter()
        .map(|p| s.mech.log_density(y - p.output))
        .collect::<Result<Vec<_>>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(CalibrationError::UndefinedOutput(y));
    }
    let (target, total) = s.weighted_sums(logs.iter().map(|l| (l - max).exp()));
    if !(total > 0.0) {
        return Err(CalibrationError::UndefinedOutput(y));
    }
    Ok(target / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl OutputGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        check_positive("grid step", step)?;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CalibrationError::InvalidArgument(format!("grid [{lo}, {hi}] is not a finite interval")));
        }
        Ok(Self { lo, hi, step })
    }

    /// Query range padded by ten noise scales, fifty steps per scale.
    pub fn for_scenario(s: &DiscreteScenario) -> Self {
        let (min, max) = s
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.output), hi.max(p.output)));
        if s.is_constant() {
            return Self { lo: min, hi: max, step: (max - min).max(1.0) };
        }
        let scale = s.mech.scale;
        Self {
            lo: min - GRID_SPAN_SCALES * scale,
            hi: max + GRID_SPAN_SCALES * scale,
            step: scale / GRID_STEPS_PER_SCALE,
        }
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.lo + k as f64 * self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvantageReport {
    /// `sup_y |posterior(y) - prior|`; the complement moves by the same amount.
    pub max_advantage: f64,
    pub argmax_y: f64,
    pub prior: f64,
    pub posterior_at_argmax: f64,
    pub grid: OutputGrid,
    pub evaluated: usize,
    pub slack: f64,
}

impl AdvantageReport {
    pub fn passes(&self, delta: f64) -> bool {
        self.max_advantage <= delta + self.slack
    }
}

/// Largest two-sided advantage over the output grid.
///
/// The target set and its complement change by the same absolute amount,
/// so one sweep checks both sides.
pub fn max_advantage(s: &DiscreteScenario, grid: &OutputGrid) -> Result<AdvantageReport> {
    let prior = s.prior();
    let mut report = AdvantageReport {
        max_advantage: 0.0,
        argmax_y: grid.lo,
        prior,
        posterior_at_argmax: prior,
        grid: *grid,
        evaluated: 0,
        slack: GRID_SLACK,
    };
    for y in grid.points() {
        let posterior = posterior_at_output(s, y)?;
        let target_gain = (posterior - prior).abs();
        let complement_gain = ((1.0 - posterior) - (1.0 - prior)).abs();
        let advantage = target_gain.max(complement_gain);
        report.evaluated += 1;
        if advantage > report.max_advantage {
            report.max_advantage = advantage;
            report.argmax_y = y;
            report.posterior_at_argmax = posterior;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discretization {
    /// Bin midpoints and their renormalised masses.
    pub points: Vec<(f64, f64)>,
    /// Prior mass inside the range before renormalisation.
    pub captured_mass: f64,
    /// Largest single-bin mass: how much a guess can gain from binning alone.
    pub max_bin_mass: f64,
}

impl Discretization {
    /// As a discrete prior with the bin midpoints as labels.
    pub fn to_prior(&self) -> Prior {
        Prior::Discrete { points: self.points.iter().map(|(x, m)| (format!("{x}"), *m)).collect() }
    }
}

/// Bin a continuous prior over `[lo, hi]` by differencing its CDF.
pub fn discretize_continuous(prior: &Prior, bins: usize, lo: f64, hi: f64) -> Result<Discretization> {
    if bins < MIN_BINS {
        return Err(CalibrationError::InvalidArgument(format!("need at least {MIN_BINS} bins, got {bins}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CalibrationError::InvalidArgument(format!("range [{lo}, {hi}] is degenerate")));
    }
    prior.validate()?;
    let cdf = |x: f64| {
        prior.cdf(x).ok_or_else(|| CalibrationError::Unsupported("prior has no cumulative distribution".into()))
    };
    let width = (hi - lo) / bins as f64;
    let mut edges = Vec::with_capacity(bins + 1);
    for k in 0..=bins {
        let x = if k == bins { hi } else { lo + k as f64 * width };
        edges.push(cdf(x)?);
    }
    let captured_mass = edges[bins] - edges[0];
    if !(captured_mass > 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("the prior puts no mass on [{lo}, {hi}]")));
    }
    let points: Vec<(f64, f64)> = edges
        .windows(2)
        .enumerate()
        .map(|(k, w)| (lo + (k as f64 + 0.5) * width, (w[1] - w[0]) / captured_mass))
        .collect();
    let max_bin_mass = points.iter().map(|(_, m)| *m).fold(0.0, f64::max);
    Ok(Discretization { points, captured_mass, max_bin_mass })
}
