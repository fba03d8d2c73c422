//! AND- and OR-events over several independent attributes.
//!
//! An AND-event is won by guessing every attribute within its radius; the
//! correct-guess set is a box and the univariate engine applies to the
//! product masses. An OR-event is won by guessing at least one attribute.
//! With interior windows its correct-guess set is split into a central block
//! around the target and per-dimension slabs; each block is compared with a
//! neighbour block at distance at most `2 ||a||`, and the worst prior-odds
//! ratio over blocks determines epsilon.

use serde::{Deserialize, Serialize};

use crate::advantage::{epsilon_one_sided, epsilon_two_sided, evaluate_ratio, BindingSide, EpsilonResult};
use crate::error::{check_open_unit, CalibrationError, Result};
use crate::priors::{Location, Prior, WindowMass};
use crate::PROB_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    And,
    Or,
}

/// An `l_p` norm restricted to the three supported exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "NormRepr", into = "NormRepr")]
pub enum Norm {
    L1,
    L2,
    #[default]
    Inf,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<NormRepr> for Norm {
    type Error = String;

    fn try_from(value: NormRepr) -> std::result::Result<Self, Self::Error> {
        match value {
            NormRepr::Number(1.0) => Ok(Norm::L1),
            NormRepr::Number(2.0) => Ok(Norm::L2),
            NormRepr::Number(n) if n.is_infinite() && n > 0.0 => Ok(Norm::Inf),
            NormRepr::Text(s) => s.parse(),
            NormRepr::Number(n) => Err(format!("unsupported norm exponent {n}; use 1, 2 or inf")),
        }
    }
}

impl From<Norm> for NormRepr {
    fn from(n: Norm) -> Self {
        match n {
            Norm::L1 => NormRepr::Number(1.0),
            Norm::L2 => NormRepr::Number(2.0),
            Norm::Inf => NormRepr::Text("inf".into()),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "infinity" | "linf" | "max" => Ok(Norm::Inf),
            other => Err(format!("unsupported norm `{other}`; use 1, 2 or inf")),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Inf => "inf",
        })
    }
}

impl Norm {
    /// `||xs||_p`.
    pub fn combine(&self, xs: &[f64]) -> f64 {
        match self {
            Norm::L1 => xs.iter().map(|x| x.abs()).sum(),
            Norm::L2 => xs.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Inf => xs.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// The dual exponent `q` with `1/p + 1/q = 1`.
    pub fn dual(&self) -> Norm {
        match self {
            Norm::L1 => Norm::Inf,
            Norm::L2 => Norm::L2,
            Norm::Inf => Norm::L1,
        }
    }
}

/// Per-dimension bounds and the norm that combines dimension distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpace {
    pub norm: Norm,
    pub dims: Vec<f64>,
}

impl MetricSpace {
    pub fn new(norm: Norm, dims: Vec<f64>) -> Result<Self> {
        if let Some(r) = dims.iter().find(|r| !(**r > 0.0)) {
            return Err(CalibrationError::InvalidArgument(format!(
                "dimension bound {r} must be positive"
            )));
        }
        Ok(Self { norm, dims })
    }

    pub fn diameter(&self) -> f64 {
        self.norm.combine(&self.dims)
    }
}

/// One attribute of an attacker goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveItem {
    pub id: String,
    pub t: Location,
    pub r: f64,
    pub prior: Prior,
    /// Largest distance between two values of this attribute.
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveSet {
    pub items: Vec<SensitiveItem>,
    pub combinator: Combinator,
}

impl SensitiveSet {
    pub fn new(items: Vec<SensitiveItem>, combinator: Combinator) -> Result<Self> {
        if items.is_empty() {
            return Err(CalibrationError::InvalidArgument("sensitive set is empty".into()));
        }
        let mut ids: Vec<&str> = items.iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CalibrationError::InvalidArgument(format!(
                "attribute `{}` appears twice in one set",
                w[0]
            )));
        }
        for item in &items {
            item.prior.validate()?;
            if !(item.r >= 0.0) || !(item.r < item.range) {
                return Err(CalibrationError::InvalidWindow(format!(
                    "attribute `{}`: radius r = {} must lie in [0, R = {})",
                    item.id, item.r, item.range
                )));
            }
        }
        Ok(Self { items, combinator })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.range).collect()
    }

    /// Per-dimension masses `(g_i(r_i), g_i(a_i))`, with `a_i` clamped to `R_i`.
    pub fn masses(&self, delta: f64, a_choices: &[f64]) -> Result<Vec<WindowMass>> {
        if a_choices.len() != self.items.len() {
            return Err(CalibrationError::InvalidArgument(format!(
                "{} window radii given for {} attributes",
                a_choices.len(),
                self.items.len()
            )));
        }
        self.items
            .iter()
            .zip(a_choices)
            .map(|(item, &a)| {
                let a = a.min(item.range);
                item.prior.window_masses(&item.t, item.r, a, delta)
            })
            .collect()
    }
}

/// Worst prior-odds ratios of the blocks used for an OR-event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrBlockDecomposition {
    /// `alpha[0]` is the central block; `alpha[k]` the slabs of dimension `k`.
    pub alpha: Vec<f64>,
    pub argmax: usize,
    pub eps: Vec<f64>,
    /// Distance used in the exponent (doubled for interior windows).
    pub a: f64,
}

/// `prod g_i(a_i) - prod (g_i(a_i) - g_i(r_i))`: mass of the window points
/// where at least one attribute is guessed.
pub fn or_block_mass(masses: &[WindowMass]) -> f64 {
    let window: f64 = masses.iter().map(|m| m.q).product();
    let miss: f64 = masses.iter().map(|m| m.q - m.p).product();
    (window - miss).max(0.0)
}

/// Prior of guessing at least one attribute: `1 - prod (1 - g_i(r_i))`.
pub fn or_prior(masses: &[f64]) -> f64 {
    1.0 - masses.iter().map(|p| 1.0 - p).product::<f64>()
}

fn validate_windows(set: &SensitiveSet, a_choices: &[f64], strict: bool) -> Result<()> {
    for (item, &a) in set.items.iter().zip(a_choices) {
        let bad = if strict { a <= item.r } else { a < item.r };
        if bad || !a.is_finite() {
            return Err(CalibrationError::InvalidWindow(format!(
                "attribute `{}`: window a = {a} must exceed r = {}",
                item.id, item.r
            )));
        }
    }
    Ok(())
}

/// AND-event epsilon for a mechanism that is DP w.r.t. the `l_inf` norm.
pub fn and_event_epsilon(set: &SensitiveSet, delta: f64, a_choices: &[f64]) -> Result<EpsilonResult> {
    and_event_epsilon_with_norm(set, delta, a_choices, Norm::Inf)
}

/// AND-event epsilon with window distance `||a||_p`.
///
/// Distances between points of the window box are bounded by the chosen norm
/// of the per-dimension radii, so any norm at least as large as `l_inf` is sound.
pub fn and_event_epsilon_with_norm(
    set: &SensitiveSet,
    delta: f64,
    a_choices: &[f64],
    norm: Norm,
) -> Result<EpsilonResult> {
    check_open_unit("delta", delta)?;
    if set.combinator != Combinator::And {
        return Err(CalibrationError::InvalidArgument("expected an AND set".into()));
    }
    validate_windows(set, a_choices, true)?;
    let masses = set.masses(delta, a_choices)?;
    if masses.len() == 1 {
        return epsilon_one_sided(masses[0].p, masses[0].q, delta, masses[0].a);
    }
    let p: f64 = masses.iter().map(|m| m.p).product();
    let q: f64 = masses.iter().map(|m| m.q).product();
    let radii: Vec<f64> = masses.iter().map(|m| m.a).collect();
    if q >= 1.0 - PROB_TOL {
        return epsilon_two_sided(p, delta, norm.combine(&radii));
    }
    epsilon_one_sided(p, q, delta, norm.combine(&radii))
}

/// OR-event epsilon for a mechanism that is DP w.r.t. the `l_inf` norm.
pub fn or_event_epsilon(
    set: &SensitiveSet,
    delta: f64,
    a_choices: &[f64],
) -> Result<(EpsilonResult, OrBlockDecomposition)> {
    or_event_epsilon_with_norm(set, delta, a_choices, Norm::Inf)
}

/// OR-event epsilon: the minimum over the central block and the per-dimension slabs.
///
/// When every window covers its whole dimension, only the central block exists
/// and no doubling of the distance is needed.
pub fn or_event_epsilon_with_norm(
    set: &SensitiveSet,
    delta: f64,
    a_choices: &[f64],
    norm: Norm,
) -> Result<(EpsilonResult, OrBlockDecomposition)> {
    check_open_unit("delta", delta)?;
    if set.combinator != Combinator::Or {
        return Err(CalibrationError::InvalidArgument("expected an OR set".into()));
    }
    validate_windows(set, a_choices, false)?;
    let masses = set.masses(delta, a_choices)?;
    let radii: Vec<f64> = masses.iter().map(|m| m.a).collect();

    if masses.len() == 1 {
        let m = masses[0];
        let res = epsilon_one_sided(m.p, m.q, delta, m.a)?;
        let alpha = m.p / (m.q - m.p);
        let decomposition = OrBlockDecomposition {
            alpha: vec![alpha, alpha],
            argmax: 0,
            eps: vec![res.epsilon, res.epsilon],
            a: m.a,
        };
        return Ok((res, decomposition));
    }

    let full = set
        .items
        .iter()
        .zip(&masses)
        .all(|(item, m)| m.a >= item.range || m.q >= 1.0 - PROB_TOL);
    let a = if full { norm.combine(&radii) } else { 2.0 * norm.combine(&radii) };

    let prior = or_prior(&masses.iter().map(|m| m.p).collect::<Vec<_>>());
    let block = or_block_mass(&masses);
    let window: f64 = masses.iter().map(|m| m.q).product();
    let miss = window - block;
    if miss <= PROB_TOL {
        return Err(CalibrationError::EmptyWindow { p: block, q: window });
    }

    let mut alpha = vec![block / miss];
    if !full {
        for (item, m) in set.items.iter().zip(&masses) {
            if m.q - m.p <= PROB_TOL {
                return Err(CalibrationError::InvalidWindow(format!(
                    "attribute `{}`: window mass {} does not exceed target mass {}",
                    item.id, m.q, m.p
                )));
            }
            alpha.push(m.p / (m.q - m.p));
        }
    }

    let results: Vec<EpsilonResult> = alpha
        .iter()
        .map(|&ratio| evaluate_ratio(ratio, prior, window, delta, a, BindingSide::Lower))
        .collect();
    let argmax = alpha
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > alpha[best] { k } else { best });
    let eps: Vec<f64> = results
        .iter()
        .map(|r| if r.feasible { r.epsilon } else { r.signed_epsilon() })
        .collect();
    let mut result = results[argmax].clone();
    result.detail = format!(
        "OR-event over {} attributes: block {argmax} of {} binds (alpha = {:.6}), a = {a}",
        masses.len(),
        alpha.len(),
        alpha[argmax]
    );
    if full {
        // Over the whole space the complement of the correct-guess set must be
        // protected as well.
        let complement = 1.0 - prior;
        if complement > PROB_TOL {
            let upper = evaluate_ratio(complement / prior, complement, 1.0, delta, a, BindingSide::Upper);
            if upper.epsilon < result.epsilon || (!upper.feasible && result.feasible) {
                result = EpsilonResult {
                    detail: format!("OR-event over the whole space: the complement (mass {complement:.6}) binds"),
                    ..upper
                };
            }
        }
    }
    Ok((result, OrBlockDecomposition { alpha, argmax, eps, a }))
}

/// Rescales every dimension so that its precision radius becomes 1.
///
/// Returns the scaled set and the per-dimension factors `1 / r_i`. An epsilon
/// computed in the scaled space is converted back with [`unscale_epsilon`].
pub fn scale_dimensions(set: &SensitiveSet) -> Result<(SensitiveSet, Vec<f64>)> {
    let mut items = Vec::with_capacity(set.items.len());
    let mut factors = Vec::with_capacity(set.items.len());
    for item in &set.items {
        if !(item.r > 0.0) {
            return Err(CalibrationError::CannotScale(item.id.clone()));
        }
        let factor = 1.0 / item.r;
        let t = match &item.t {
            Location::Value(v) => Location::Value(v * factor),
            Location::Label(_) => return Err(CalibrationError::CannotScale(item.id.clone())),
        };
        items.push(SensitiveItem {
            id: item.id.clone(),
            t,
            r: 1.0,
            prior: item.prior.scaled(factor)?,
            range: item.range * factor,
        });
        factors.push(factor);
    }
    Ok((SensitiveSet { items, combinator: set.combinator }, factors))
}

/// Epsilon in original units from one computed after scaling distances by `factor`.
pub fn unscale_epsilon(epsilon: f64, factor: f64) -> f64 {
    epsilon * factor
}
