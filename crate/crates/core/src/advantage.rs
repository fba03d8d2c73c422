//! Univariate conversion of an advantage bound `delta` into `epsilon`.
//!
//! If every input inside a window of radius `a` around the target is
//! `epsilon * a`-indistinguishable from the target, the posterior of the
//! correct-guess set `X'` is at most `1 / (1 + e^(-epsilon a) (q - p) / p)`.
//! Requiring this to stay below `p + delta` and solving for `epsilon` gives
//!
//! ```text
//! epsilon = -ln( p / (q - p) * (1 / (delta + p) - 1) ) / a
//! ```

use serde::Serialize;

use crate::error::{check_open_unit, check_positive, CalibrationError, Result};
use crate::priors::{Location, Prior, WindowMass};
use crate::PROB_TOL;

/// Default number of window radii tried by [`scan_window`].
pub const DEFAULT_SCAN_POINTS: usize = 64;

/// Which posterior bound determined the returned epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingSide {
    /// Posterior of the correct-guess set must not grow by more than `delta`.
    Lower,
    /// Posterior of the complement must not grow by more than `delta`.
    Upper,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationInput {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub a: f64,
}

impl CalibrationInput {
    pub fn new(p: f64, q: f64, delta: f64, a: f64) -> Result<Self> {
        check_open_unit("delta", delta)?;
        check_positive("window radius", a)?;
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0 + PROB_TOL).contains(&q) {
            return Err(CalibrationError::InvalidArgument(format!(
                "prior masses must be probabilities (p = {p}, q = {q})"
            )));
        }
        if q - p <= PROB_TOL {
            return Err(CalibrationError::EmptyWindow { p, q });
        }
        Ok(Self { p, q: q.min(1.0), delta, a })
    }

    /// The quantity whose negated logarithm (divided by `a`) is epsilon.
    pub fn ln_argument(&self) -> f64 {
        (self.p / (self.q - self.p)) * (1.0 / (self.delta + self.p) - 1.0)
    }

    /// `delta + p > p / q`: the window is wide enough for some positive epsilon.
    pub fn is_feasible(&self) -> bool {
        self.delta + self.p > self.p / self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonResult {
    /// Privacy parameter; `f64::INFINITY` when the advantage bound is vacuous
    /// and `0.0` when infeasible.
    pub epsilon: f64,
    pub feasible: bool,
    pub side: BindingSide,
    /// Argument of the logarithm; at least 1 exactly when infeasible.
    pub ln_argument: f64,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub detail: String,
}

impl EpsilonResult {
    /// `epsilon` if the window admits a positive solution.
    pub fn value(&self) -> Option<f64> {
        self.feasible.then_some(self.epsilon)
    }

    pub fn is_vacuous(&self) -> bool {
        self.feasible && self.epsilon.is_infinite()
    }

    /// `-ln(argument) / a` without clamping; negative for infeasible windows.
    pub fn signed_epsilon(&self) -> f64 {
        if self.ln_argument <= 0.0 {
            f64::INFINITY
        } else {
            -self.ln_argument.ln() / self.a
        }
    }

    fn with_side(mut self, side: BindingSide) -> Self {
        self.side = side;
        self
    }
}

/// Epsilon that keeps the posterior of a window-constrained correct-guess set
/// below `p + delta`.
pub fn epsilon_one_sided(p: f64, q: f64, delta: f64, a: f64) -> Result<EpsilonResult> {
    let input = CalibrationInput::new(p, q, delta, a)?;
    Ok(evaluate(&input, BindingSide::Lower))
}

fn evaluate(input: &CalibrationInput, side: BindingSide) -> EpsilonResult {
    let CalibrationInput { p, q, delta, a } = *input;
    evaluate_ratio(p / (q - p), p, q, delta, a, side)
}

/// Epsilon from a prior-odds ratio `Pr[block] / Pr[neighbour block]` and the
/// overall prior `p` of the correct-guess set.
pub(crate) fn evaluate_ratio(
    ratio: f64,
    p: f64,
    q: f64,
    delta: f64,
    a: f64,
    side: BindingSide,
) -> EpsilonResult {
    let argument = ratio * (1.0 / (delta + p) - 1.0);
    let base = EpsilonResult {
        epsilon: 0.0,
        feasible: false,
        side,
        ln_argument: argument,
        p,
        q,
        a,
        detail: String::new(),
    };
    if p <= 0.0 {
        return EpsilonResult {
            epsilon: f64::INFINITY,
            feasible: true,
            detail: "target set has zero prior mass; its posterior cannot grow".into(),
            ..base
        };
    }
    if delta + p >= 1.0 - PROB_TOL {
        return EpsilonResult {
            epsilon: f64::INFINITY,
            feasible: true,
            detail: format!("delta + p = {} >= 1: the advantage bound is vacuous", delta + p),
            ..base
        };
    }
    if argument >= 1.0 {
        return EpsilonResult {
            detail: format!(
                "window too narrow: ln argument {argument:.6} >= 1 (p = {p:.6}, q = {q:.6}, delta + p = {:.6})",
                delta + p
            ),
            ..base
        };
    }
    EpsilonResult {
        epsilon: -argument.ln() / a,
        feasible: true,
        detail: format!("p = {p:.6}, q = {q:.6}, a = {a}"),
        ..base
    }
}

/// Epsilon for an unconstrained window (`q = 1`), bounding the posterior of
/// both the correct-guess set (prior `p`) and its complement (prior `1 - p`).
pub fn epsilon_two_sided(p: f64, delta: f64, a: f64) -> Result<EpsilonResult> {
    let (lb, ub) = two_sided_bounds(p, delta, a)?;
    Ok(if lb.epsilon < ub.epsilon {
        lb.with_side(BindingSide::Lower)
    } else if ub.epsilon < lb.epsilon {
        ub.with_side(BindingSide::Upper)
    } else {
        lb.with_side(BindingSide::Both)
    })
}

/// Both one-sided results over the full space: `(lower, upper)`.
pub fn two_sided_bounds(p: f64, delta: f64, a: f64) -> Result<(EpsilonResult, EpsilonResult)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CalibrationError::InvalidArgument(format!("p = {p} is not a probability")));
    }
    let side = |mass: f64, side: BindingSide| -> Result<EpsilonResult> {
        if mass >= 1.0 - PROB_TOL {
            check_open_unit("delta", delta)?;
            check_positive("window radius", a)?;
            // The whole space: the posterior is identically 1.
            return Ok(EpsilonResult {
                epsilon: f64::INFINITY,
                feasible: true,
                side,
                ln_argument: 0.0,
                p: mass,
                q: 1.0,
                a,
                detail: "set covers the whole space; nothing to learn".into(),
            });
        }
        Ok(evaluate(&CalibrationInput::new(mass, 1.0, delta, a)?, side))
    };
    Ok((side(p, BindingSide::Lower)?, side(1.0 - p, BindingSide::Upper)?))
}

/// The side that [`epsilon_two_sided`] must pick: the lower bound whenever `p <= 1 - p`.
pub fn shortcut_side(p: f64) -> BindingSide {
    if p <= 1.0 - p {
        BindingSide::Lower
    } else {
        BindingSide::Upper
    }
}

/// `1 / (1 + e^(-epsilon a) (q - p) / p)`: the largest posterior of the target set.
pub fn posterior_upper_bound(p: f64, q: f64, epsilon: f64, a: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "epsilon = {epsilon} must be non-negative"
        )));
    }
    if q - p <= PROB_TOL {
        return Err(CalibrationError::EmptyWindow { p, q });
    }
    if p <= 0.0 {
        return Ok(0.0);
    }
    let exponent = -epsilon * a;
    if exponent == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + exponent.exp() * (q - p) / p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    pub best: EpsilonResult,
    pub window: WindowMass,
    pub evaluated: usize,
    /// Smallest `p / q` seen over the grid; useful when nothing is feasible.
    pub min_ratio: f64,
}

/// Tries `N` windows `a = r + k (R - r) / N` and keeps the feasible one with the
/// largest epsilon (least noise).
///
/// When no window is feasible, the returned result is infeasible and reports
/// the full window `a = R`.
pub fn scan_window(
    prior: &Prior,
    t: &Location,
    r: f64,
    delta: f64,
    range: f64,
    n: usize,
) -> Result<ScanOutcome> {
    if n == 0 {
        return Err(CalibrationError::InvalidArgument("scan needs at least one grid point".into()));
    }
    if !(r >= 0.0) || !(r < range) {
        return Err(CalibrationError::InvalidWindow(format!(
            "precision radius r = {r} must be below the range R = {range}"
        )));
    }
    check_open_unit("delta", delta)?;

    let mut best: Option<(EpsilonResult, WindowMass)> = None;
    let mut last: Option<(EpsilonResult, WindowMass)> = None;
    let mut min_ratio = f64::INFINITY;
    for k in 1..=n {
        let a = if k == n { range } else { r + k as f64 * (range - r) / n as f64 };
        let mass = prior.window_masses(t, r, a, delta)?;
        if mass.q > 0.0 {
            min_ratio = min_ratio.min(mass.p / mass.q);
        }
        let result = match CalibrationInput::new(mass.p, mass.q, delta, a) {
            Ok(input) => evaluate(&input, BindingSide::Lower),
            Err(CalibrationError::EmptyWindow { .. }) => continue,
            Err(e) => return Err(e),
        };
        if result.feasible && best.as_ref().is_none_or(|(b, _)| result.epsilon > b.epsilon) {
            best = Some((result.clone(), mass));
        }
        last = Some((result, mass));
    }
    let (best, window) = match best.or(last) {
        Some(found) => found,
        None => {
            let mass = prior.window_masses(t, r, range, delta)?;
            return Err(CalibrationError::EmptyWindow { p: mass.p, q: mass.q });
        }
    };
    let mut best = best;
    if !best.feasible {
        best.detail = format!(
            "no window in ({r}, {range}] is feasible; smallest p / q seen was {min_ratio:.6}"
        );
    }
    Ok(ScanOutcome { best, window, evaluated: n, min_ratio })
}

/// Smallest window radius for which a positive epsilon exists, i.e. the
/// solution of `q(a) = p / (delta + p)`.
///
/// `q` is taken from the prior's window-mass function, which is monotone in
/// `a`; the result is located by bisection to `tol` in radius.
pub fn smallest_feasible_window(
    prior: &Prior,
    t: &Location,
    r: f64,
    delta: f64,
    range: f64,
    tol: f64,
) -> Result<Option<f64>> {
    check_open_unit("delta", delta)?;
    let p = prior.window_mass(t, r)?;
    if delta + p >= 1.0 {
        return Ok(Some(r));
    }
    let needed = p / (delta + p);
    let slack = |a: f64| -> Result<f64> { Ok(prior.window_mass(t, a)? - needed) };
    if slack(range)? <= 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (r, range);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if slack(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::RangePolicy;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cats_and_value() {
        let res = epsilon_one_sided(0.2, 1.0, 0.1, 1.0).unwrap();
        assert!(res.feasible);
        // -ln(0.25 * 7 / 3)
        assert_abs_diff_eq!(res.epsilon, 0.538_996_500_732_687, epsilon = 1e-12);
    }

    #[test]
    fn cats_or_value() {
        let res = epsilon_one_sided(0.475, 1.0, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(res.epsilon, 0.402_364_330_429_916, epsilon = 1e-12);
    }

    #[test]
    fn vacuous_when_delta_plus_p_reaches_one() {
        let res = epsilon_one_sided(0.45, 1.0, 0.55, 1.0).unwrap();
        assert!(res.is_vacuous());
        assert_eq!(res.epsilon, f64::INFINITY);
    }

    #[test]
    fn narrow_window_is_infeasible() {
        let res = epsilon_one_sided(0.42, 0.6, 0.1, 200.0).unwrap();
        assert!(!res.feasible);
        assert_eq!(res.value(), None);
        assert_abs_diff_eq!(res.ln_argument, 2.153_846_153_846, epsilon = 1e-9);
        assert!(res.signed_epsilon() < 0.0);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert!(matches!(
            epsilon_one_sided(0.5, 0.5, 0.1, 1.0),
            Err(CalibrationError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn two_sided_picks_the_smaller_side() {
        let res = epsilon_two_sided(0.2, 0.1, 1.0).unwrap();
        assert_eq!(res.side, BindingSide::Lower);
        assert_abs_diff_eq!(res.epsilon, 0.538_996_500_732_687, epsilon = 1e-12);

        let res = epsilon_two_sided(0.525, 0.1, 1.0).unwrap();
        assert_eq!(res.side, BindingSide::Upper);
        assert_abs_diff_eq!(res.epsilon, 0.402_364_330_429_916, epsilon = 1e-12);

        let res = epsilon_two_sided(0.5, 0.1, 1.0).unwrap();
        assert_eq!(res.side, BindingSide::Both);
    }

    #[test]
    fn two_sided_of_certain_prior_is_vacuous() {
        assert!(epsilon_two_sided(1.0, 0.1, 1.0).unwrap().is_vacuous());
        assert!(epsilon_two_sided(0.0, 0.1, 1.0).unwrap().is_vacuous());
    }

    #[test]
    fn posterior_bound_limits() {
        assert_abs_diff_eq!(posterior_upper_bound(0.2, 0.8, 0.0, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(posterior_upper_bound(0.5, 1.0, f64::INFINITY, 1.0).unwrap(), 1.0);
        assert!(posterior_upper_bound(0.5, 1.0, 50.0, 1.0).unwrap() >= 1.0 - 1e-15);
        let eps = epsilon_one_sided(0.2, 1.0, 0.1, 1.0).unwrap().epsilon;
        assert_abs_diff_eq!(posterior_upper_bound(0.2, 1.0, eps, 1.0).unwrap(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn single_point_scan_is_the_full_window() {
        let prior = Prior::Uniform { start: 0.0, length: 100.0 };
        let out = scan_window(&prior, &Location::Value(50.0), 10.0, 0.1, 100.0, 1).unwrap();
        let direct = epsilon_one_sided(0.2, 1.0, 0.1, 100.0).unwrap();
        assert_eq!(out.best.epsilon, direct.epsilon);
        assert_eq!(out.window.a, 100.0);
    }

    #[test]
    fn scan_on_peaked_prior_only_succeeds_near_the_full_window() {
        // p = 0.9 at r, delta = 0.01: feasibility needs q >= 0.9 / 0.91.
        let prior = Prior::Normal { mu: 0.0, sigma: 1.0, range: RangePolicy::Explicit(10.0) };
        let r = 1.644_853_626_951_472_2; // two-sided 90% radius
        assert_abs_diff_eq!(prior.window_mass(&Location::Value(0.0), r).unwrap(), 0.9, epsilon = 1e-9);
        let out = scan_window(&prior, &Location::Value(0.0), r, 0.01, 10.0, 64).unwrap();
        assert!(out.best.feasible);
        assert!(out.window.q >= 0.9 / 0.91);

        let narrow = Prior::Normal { mu: 0.0, sigma: 1.0, range: RangePolicy::Explicit(2.0) };
        let out = scan_window(&narrow, &Location::Value(0.0), r, 0.01, 2.0, 64).unwrap();
        assert!(!out.best.feasible);
        assert!(out.min_ratio > 0.91);
    }

    #[test]
    fn smallest_window_sits_on_the_feasibility_boundary() {
        let prior = Prior::Normal { mu: 2000.0, sigma: 235.7, range: RangePolicy::default() };
        let t = Location::Value(2000.0);
        let a = smallest_feasible_window(&prior, &t, 100.0, 0.1, 3000.0, 1e-9).unwrap().unwrap();
        let p = prior.window_mass(&t, 100.0).unwrap();
        let q = prior.window_mass(&t, a).unwrap();
        assert_abs_diff_eq!(0.1 + p, p / q, epsilon = 1e-9);
    }
}
