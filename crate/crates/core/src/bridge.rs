//! Conversions between `(eps, delta)`-DP and `(eps', delta')` guessing advantage.
//!
//! Throughout, `p` is the prior of the correct-guess set and `q` the prior of
//! the whole window, so the neighbour annulus carries `q - p`. Under an
//! `(eps, delta)`-DP mechanism with noise density `f`, the posterior of the
//! correct-guess set is at most
//!
//! ```text
//! 1 / (1 + (q - p) / p / (e^eps + delta / chi))
//! ```
//!
//! where `chi` lower-bounds the output density over the annulus. `chi` is only
//! bounded away from zero for outputs within `d` of the true answer, so the
//! guessing bound `eps'` holds with the probability `delta'` that the noise
//! stays in `[-d, d]`.
//!
//! `delta'` is the probability that the bound *holds*, not a failure probability.

use serde::Serialize;

use crate::advantage::{epsilon_one_sided, posterior_upper_bound};
use crate::error::{check_open_unit, check_positive, check_probability, CalibrationError, Result};
use crate::noise::MechanismSpec;
use crate::radius::{lambert_w_eval, lambert_w_minus1_eval};
use crate::PROB_TOL;

/// Grid sizes for the approximate-DP parameter search.
pub const DEFAULT_ALPHA_GRID: usize = 64;
pub const DEFAULT_B_GRID: usize = 64;

/// Default smoothness when no better starting point is supplied: `eps / 8`.
pub const DEFAULT_BETA_FRACTION: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeStatus {
    Satisfied,
    /// The requested guarantee cannot be met with these parameters.
    CannotSatisfy,
    /// Only the trivial bound (posterior at most 1) is available.
    Vacuous,
}

/// Every quantity that takes part in a conversion; fields that a given
/// direction does not use stay `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BridgeParams {
    pub eps: f64,
    pub delta: f64,
    pub eps_prime: Option<f64>,
    pub delta_prime: Option<f64>,
    pub avg_advantage: Option<f64>,
    pub chi_lo: Option<f64>,
    pub chi_hi: Option<f64>,
    pub alpha: Option<f64>,
    pub b_prime: Option<f64>,
    pub beta: Option<f64>,
    pub d_of_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaBound {
    pub status: BridgeStatus,
    pub params: BridgeParams,
    pub detail: String,
}

/// `1 + (eps' - 1) delta'`: the advantage bound averaged over good and bad outputs.
pub fn average_advantage(eps_prime: f64, delta_prime: f64) -> Result<f64> {
    check_probability("delta'", delta_prime)?;
    if !(0.0..=1.0).contains(&eps_prime) {
        return Err(CalibrationError::InvalidArgument(format!("eps' = {eps_prime} must lie in [0, 1]")));
    }
    Ok(1.0 + (eps_prime - 1.0) * delta_prime)
}

fn window_ratio(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) || !(q <= 1.0 + PROB_TOL) {
        return Err(CalibrationError::InvalidArgument(format!(
            "need 0 < p <= q <= 1 (p = {p}, q = {q})"
        )));
    }
    if q - p <= PROB_TOL {
        return Err(CalibrationError::EmptyWindow { p, q });
    }
    Ok((q - p) / p)
}

fn check_dp(eps: f64, delta: f64) -> Result<()> {
    if !(eps >= 0.0) || eps.is_infinite() {
        return Err(CalibrationError::InvalidArgument(format!("eps = {eps} must be finite and non-negative")));
    }
    check_probability("delta", delta)
}

/// Posterior bound given a lower bound `chi_lo` on the annulus output density.
pub fn posterior_bound_with_density(eps: f64, delta: f64, chi_lo: f64, p: f64, q: f64) -> Result<f64> {
    check_dp(eps, delta)?;
    let ratio = window_ratio(p, q)?;
    if delta == 0.0 {
        return posterior_upper_bound(p, q, eps, 1.0);
    }
    if !(chi_lo > 0.0) {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + ratio / (eps.exp() + delta / chi_lo)))
}

/// Posterior bound of an approximate-DP mechanism in terms of the largest
/// annulus density `chi_hi`: `1 / (1 + e^-eps (1 - delta / chi_hi) (q - p) / p)`.
///
/// `None` when `delta >= chi_hi`: no positive epsilon exists then.
pub fn approx_dp_posterior_bound(eps: f64, delta: f64, chi_hi: f64, p: f64, q: f64) -> Result<Option<f64>> {
    check_dp(eps, delta)?;
    check_positive("chi_hi", chi_hi)?;
    let ratio = window_ratio(p, q)?;
    if delta >= chi_hi {
        return Ok(None);
    }
    Ok(Some(1.0 / (1.0 + (-eps).exp() * (1.0 - delta / chi_hi) * ratio)))
}

/// Guessing bound `eps'` that holds with probability `delta'`.
///
/// `d(delta')` is the noise radius holding mass `delta'`, and the annulus
/// density is bounded below by `f(c_t + d)`.
pub fn dp_to_ga_fixed_delta(
    eps: f64,
    delta: f64,
    p: f64,
    q: f64,
    mech: &MechanismSpec,
    c_t: f64,
    delta_prime: f64,
) -> Result<GaBound> {
    check_dp(eps, delta)?;
    check_probability("delta'", delta_prime)?;
    if !(c_t >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("c(t) = {c_t} must be non-negative")));
    }
    window_ratio(p, q)?;
    let mut params = BridgeParams { eps, delta, delta_prime: Some(delta_prime), ..Default::default() };

    if delta == 0.0 {
        let eps_prime = posterior_upper_bound(p, q, eps, 1.0)? - p;
        params.eps_prime = Some(eps_prime);
        params.avg_advantage = Some(1.0 + (eps_prime - 1.0) * delta_prime);
        return Ok(GaBound {
            status: BridgeStatus::Satisfied,
            params,
            detail: "delta = 0: the pure-DP posterior bound holds for every output".into(),
        });
    }

    let d = if delta_prime >= 1.0 { f64::INFINITY } else { mech.quantile(delta_prime)? };
    params.d_of_delta = Some(d);
    let chi = if d.is_finite() { mech.density(c_t + d)? } else { 0.0 };
    params.chi_lo = Some(chi);
    if chi <= 0.0 {
        let eps_prime = 1.0 - p;
        params.eps_prime = Some(eps_prime);
        params.avg_advantage = Some(1.0 + (eps_prime - 1.0) * delta_prime);
        return Ok(GaBound {
            status: BridgeStatus::Vacuous,
            params,
            detail: "the noise density vanishes at c(t) + d; only the trivial bound remains".into(),
        });
    }
    let posterior = posterior_bound_with_density(eps, delta, chi, p, q)?;
    let eps_prime = posterior - p;
    params.eps_prime = Some(eps_prime);
    let (status, detail) = if eps_prime < 0.0 {
        (BridgeStatus::CannotSatisfy, format!("eps' = {eps_prime} is negative"))
    } else if posterior >= 1.0 - PROB_TOL {
        (BridgeStatus::Vacuous, "the delta term dominates; the posterior bound is 1".to_string())
    } else {
        params.avg_advantage = Some(1.0 + (eps_prime - 1.0) * delta_prime);
        (BridgeStatus::Satisfied, format!("chi_lo = f(c(t) + d) = {chi:.6e} with d = {d:.6}"))
    };
    Ok(GaBound { status, params, detail })
}

/// Probability `delta'` with which a requested guessing bound `eps'` holds.
pub fn dp_to_ga_fixed_eps(
    eps: f64,
    delta: f64,
    p: f64,
    q: f64,
    mech: &MechanismSpec,
    c_t: f64,
    eps_prime: f64,
) -> Result<GaBound> {
    check_dp(eps, delta)?;
    if !(eps_prime >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("eps' = {eps_prime} must be non-negative")));
    }
    if !(c_t >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("c(t) = {c_t} must be non-negative")));
    }
    let ratio = window_ratio(p, q)?;
    let mut params = BridgeParams { eps, delta, eps_prime: Some(eps_prime), ..Default::default() };
    let satisfied = |mut params: BridgeParams, delta_prime: f64, detail: String| {
        params.delta_prime = Some(delta_prime);
        params.avg_advantage = Some(1.0 + (eps_prime.min(1.0) - 1.0) * delta_prime);
        GaBound { status: BridgeStatus::Satisfied, params, detail }
    };

    let target = p + eps_prime;
    if target >= 1.0 {
        return Ok(satisfied(params, 1.0, "p + eps' >= 1: the bound holds trivially".into()));
    }
    let k = target / (1.0 - target) * ratio;
    if k <= eps.exp() {
        return Ok(GaBound {
            status: BridgeStatus::CannotSatisfy,
            params,
            detail: format!("even delta = 0 cannot reach eps' = {eps_prime}: needs e^eps < {k:.6}"),
        });
    }
    if delta == 0.0 {
        return Ok(satisfied(params, 1.0, "delta = 0: the bound holds for every output".into()));
    }
    let threshold = delta / (k - eps.exp());
    params.chi_lo = Some(threshold);
    let x = mech.inverse_density(threshold)?;
    let d = x.map(|x| x - c_t).filter(|d| *d > 0.0);
    let Some(d) = d else {
        return Ok(GaBound {
            status: BridgeStatus::CannotSatisfy,
            params,
            detail: format!("f(c(t)) does not exceed the required density {threshold:.6e}; no such d exists"),
        });
    };
    params.d_of_delta = Some(d);
    let delta_prime = mech.central_mass(d)?;
    Ok(satisfied(params, delta_prime, format!("f(c(t) + d) = {threshold:.6e} at d = {d:.6}")))
}

/// Probabilistic DP: the guessing guarantee of the pure pipeline holds except
/// on outputs of total probability `delta`, so the same `delta` is shared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilisticDp {
    pub eps: f64,
    pub delta: f64,
    /// `delta >= 1`: the guarantee never needs to hold.
    pub vacuous: bool,
}

pub fn ga_to_dp_probabilistic(delta_shared: f64, pure_epsilon: f64) -> Result<ProbabilisticDp> {
    check_probability("delta", delta_shared)?;
    if !(pure_epsilon >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("epsilon = {pure_epsilon} must be non-negative")));
    }
    Ok(ProbabilisticDp { eps: pure_epsilon, delta: delta_shared, vacuous: delta_shared >= 1.0 })
}

/// DP `delta` of a Laplace smooth-sensitivity mechanism: `2 e^(eps - 1 - (eps - b) / beta)`.
pub fn laplace_smooth_delta(eps: f64, b: f64, beta: f64) -> f64 {
    2.0 * (eps - 1.0 - (eps - b) / beta).exp()
}

/// The term `delta / chi_hi = 4 e^(eps - 1 - (eps - b) / beta) c / b` that
/// shrinks the approximate-DP posterior bound.
pub fn approx_delta_term(eps: f64, b: f64, beta: f64, c: f64) -> f64 {
    4.0 * (eps - 1.0 - (eps - b) / beta).exp() * c / b
}

/// Largest smoothness for which `approx_delta_term <= c / C`:
/// `(eps - b) / (eps - 1 - ln(b / (4 C)))`.
///
/// `None` when the denominator is not positive (every `beta` qualifies).
pub fn beta_guard(eps: f64, b: f64, c_bound: f64) -> Option<f64> {
    let denom = eps - 1.0 - (b / (4.0 * c_bound)).ln();
    (denom > 0.0).then(|| (eps - b) / denom)
}

/// The `alpha = 0` parameterisation: `b' = eps - beta` with `delta = 0`.
pub fn degenerate_candidate(eps: f64, beta: f64) -> BridgeParams {
    BridgeParams {
        eps,
        delta: 0.0,
        alpha: Some(0.0),
        b_prime: Some(eps - beta),
        beta: Some(beta),
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// `beta = 0`: pure DP at the global sensitivity bound.
    Degenerate,
    ClosedForm,
    Scan,
}

/// Largest admissible `b'` at one `alpha`, found in closed form and by scanning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaCandidates {
    pub alpha: f64,
    pub closed_form: Option<f64>,
    pub scan: Option<f64>,
}

impl AlphaCandidates {
    pub fn best(&self) -> Option<(f64, CandidateSource)> {
        match (self.closed_form, self.scan) {
            (Some(c), Some(s)) if s > c => Some((s, CandidateSource::Scan)),
            (Some(c), _) => Some((c, CandidateSource::ClosedForm)),
            (None, Some(s)) => Some((s, CandidateSource::Scan)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxLaplaceConfig {
    /// Smoothness `beta`; `None` selects `eps * DEFAULT_BETA_FRACTION`.
    pub beta: Option<f64>,
    pub alpha_grid: usize,
    pub b_grid: usize,
}

impl Default for ApproxLaplaceConfig {
    fn default() -> Self {
        Self { beta: None, alpha_grid: DEFAULT_ALPHA_GRID, b_grid: DEFAULT_B_GRID }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxLaplaceResult {
    /// Epsilon of the pure pipeline for the requested advantage.
    pub pure_epsilon: f64,
    pub mechanism: Option<MechanismSpec>,
    pub params: BridgeParams,
    /// `c(t) / b'`; infinite when no finite-noise parameterisation exists.
    pub noise_level: f64,
    pub source: Option<CandidateSource>,
    /// Sensitivity bound the winning candidate was checked against.
    pub c_bound: f64,
    pub detail: String,
}

struct SearchContext {
    eps: f64,
    beta: f64,
    c_t: f64,
    c_bound: f64,
}

impl SearchContext {
    /// `1 - 4 e^(eps_a - 1 - (eps_a - b) / beta) c / b >= e^-alpha`, plus the
    /// sensitivity-bound guard.
    fn admissible(&self, alpha: f64, b: f64) -> bool {
        let eps_a = self.eps - alpha;
        if !(b > 0.0) || b > eps_a - self.beta + 1e-15 {
            return false;
        }
        let term = approx_delta_term(eps_a, b, self.beta, self.c_t);
        if !(1.0 - term >= (-alpha).exp()) {
            return false;
        }
        match beta_guard(eps_a, b, self.c_bound) {
            Some(g) => self.beta <= g,
            None => true,
        }
    }

    fn candidates_at(&self, alpha: f64, b_grid: usize) -> AlphaCandidates {
        let eps_a = self.eps - alpha;
        let cap = eps_a - self.beta;
        if !(alpha > 0.0) || !(cap > 0.0) {
            return AlphaCandidates { alpha, closed_form: None, scan: None };
        }
        AlphaCandidates {
            alpha,
            closed_form: self.closed_form(alpha, cap).filter(|&b| self.admissible(alpha, b)),
            scan: self.scan(alpha, cap, b_grid),
        }
    }

    /// `b' = -beta W(-1 / Y)` with `Y = (1 - e^-alpha) beta / (4 c e^(eps_a - 1 - eps_a / beta))`.
    ///
    /// `e^x / x <= Y` holds between the two real branches; the larger root
    /// (lower branch) gives the least noise and is capped at `eps_a - beta`.
    fn closed_form(&self, alpha: f64, cap: f64) -> Option<f64> {
        let eps_a = self.eps - alpha;
        let ln_y = ((1.0 - (-alpha).exp()) * self.beta / (4.0 * self.c_t)).ln()
            - (eps_a - 1.0 - eps_a / self.beta);
        if !(ln_y >= 1.0) {
            return None;
        }
        let arg = -(-ln_y).exp();
        let (x_lo, x_hi) = if arg == 0.0 || arg > -1e-300 {
            (0.0, f64::INFINITY)
        } else {
            let lo = -lambert_w_eval(arg).ok()?.w;
            let hi = -lambert_w_minus1_eval(arg).ok()?.w;
            (lo, hi)
        };
        let (b_lo, b_hi) = (self.beta * x_lo, self.beta * x_hi);
        (b_lo <= cap).then(|| b_hi.min(cap))
    }

    /// Largest admissible `b'` on a grid over `(0, cap]`, refined once around
    /// the incumbent.
    fn scan(&self, alpha: f64, cap: f64, n: usize) -> Option<f64> {
        let n = n.max(1);
        let step = cap / n as f64;
        let best = (1..=n)
            .rev()
            .map(|k| if k == n { cap } else { k as f64 * step })
            .find(|&b| self.admissible(alpha, b))?;
        if best >= cap {
            return Some(cap);
        }
        let fine = step / n as f64;
        let refined = (1..=n)
            .rev()
            .map(|k| best + k as f64 * fine)
            .find(|&b| b <= cap && self.admissible(alpha, b))
            .unwrap_or(best);
        Some(refined)
    }
}

#[derive(Debug, Clone, Copy)]
struct Incumbent {
    noise: f64,
    alpha: f64,
    b: f64,
    source: CandidateSource,
}

fn better(a: &Incumbent, b: &Incumbent) -> bool {
    (a.noise, a.alpha, -a.b).partial_cmp(&(b.noise, b.alpha, -b.b)) == Some(std::cmp::Ordering::Less)
}

/// Parameters of a Laplace smooth-sensitivity mechanism meeting advantage
/// `delta_target` under approximate DP, chosen to minimise `c(t) / b'`.
///
/// `c_bound` is a global bound on the derivative sensitivity (`f64::INFINITY`
/// if none is known). The `beta = 0` candidate runs pure DP at noise `C / eps`.
pub fn ga_to_dp_approximate_laplace(
    delta_target: f64,
    p: f64,
    q: f64,
    c_t: f64,
    c_bound: f64,
    config: &ApproxLaplaceConfig,
) -> Result<ApproxLaplaceResult> {
    check_open_unit("delta", delta_target)?;
    if !(c_t >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("c(t) = {c_t} must be non-negative")));
    }
    if !(c_bound > 0.0) {
        return Err(CalibrationError::InvalidArgument(format!("sensitivity bound {c_bound} must be positive")));
    }
    let pure = epsilon_one_sided(p, q, delta_target, 1.0)?;
    let eps = pure.epsilon;
    let empty = |detail: String, c_bound: f64| ApproxLaplaceResult {
        pure_epsilon: eps,
        mechanism: None,
        params: BridgeParams { eps, ..Default::default() },
        noise_level: f64::INFINITY,
        source: None,
        c_bound,
        detail,
    };
    if !pure.feasible {
        return Ok(empty(format!("no positive epsilon for this window: {}", pure.detail), c_bound));
    }
    if eps.is_infinite() {
        return Ok(ApproxLaplaceResult {
            noise_level: 0.0,
            detail: "the advantage bound is vacuous; no noise is needed".into(),
            ..empty(String::new(), c_bound)
        });
    }
    if !c_t.is_finite() {
        return Ok(empty("derivative sensitivity is unbounded at the data".into(), c_bound));
    }
    if c_t == 0.0 {
        let params = degenerate_candidate(eps, 0.0);
        return Ok(ApproxLaplaceResult {
            noise_level: 0.0,
            params,
            source: Some(CandidateSource::Degenerate),
            detail: "zero derivative sensitivity: the output reveals nothing".into(),
            ..empty(String::new(), c_bound)
        });
    }

    // Larger bounds only tighten the beta guard, so the smallest bound that
    // still covers c(t) is the best one to try when none is given.
    let effective_bound = if c_bound.is_finite() { c_bound } else { c_t };
    let beta = config.beta.unwrap_or(eps * DEFAULT_BETA_FRACTION);
    if !(beta > 0.0) || beta >= eps {
        return Err(CalibrationError::InvalidArgument(format!(
            "smoothness beta = {beta} must lie in (0, eps = {eps})"
        )));
    }
    let ctx = SearchContext { eps, beta, c_t, c_bound: effective_bound };

    let mut best: Option<Incumbent> = c_bound.is_finite().then(|| Incumbent {
        noise: c_bound / eps,
        alpha: 0.0,
        b: eps,
        source: CandidateSource::Degenerate,
    });
    let consider = |alpha: f64, best: &mut Option<Incumbent>| {
        if let Some((b, source)) = ctx.candidates_at(alpha, config.b_grid).best() {
            let cand = Incumbent { noise: c_t / b, alpha, b, source };
            if best.as_ref().is_none_or(|inc| better(&cand, inc)) {
                *best = Some(cand);
            }
        }
    };
    let n = config.alpha_grid.max(1);
    let step = eps / n as f64;
    for k in 1..=n {
        consider(k as f64 * step, &mut best);
    }
    if let Some(inc) = best.filter(|i| i.source != CandidateSource::Degenerate) {
        let fine = 2.0 * step / n as f64;
        for k in 1..n {
            let alpha = inc.alpha - step + k as f64 * fine;
            if alpha > 0.0 && alpha < eps {
                consider(alpha, &mut best);
            }
        }
    }

    let Some(inc) = best else {
        return Ok(empty(
            "no finite-noise parameterisation: the sensitivity bound forces beta = 0".into(),
            c_bound,
        ));
    };
    let (params, mechanism) = match inc.source {
        CandidateSource::Degenerate => {
            let params = degenerate_candidate(eps, 0.0);
            (params, MechanismSpec::laplace(c_bound / eps)?)
        }
        _ => {
            let eps_a = eps - inc.alpha;
            let delta = laplace_smooth_delta(eps_a, inc.b, beta);
            let params = BridgeParams {
                eps: eps_a,
                delta,
                alpha: Some(inc.alpha),
                b_prime: Some(inc.b),
                beta: Some(beta),
                chi_hi: Some(inc.b / (2.0 * c_t)),
                ..Default::default()
            };
            let mut mech = MechanismSpec::laplace(c_t / inc.b)?;
            mech.b = Some(inc.b);
            mech.beta = beta;
            mech.c_t = c_t;
            (params, mech)
        }
    };
    Ok(ApproxLaplaceResult {
        pure_epsilon: eps,
        mechanism: Some(mechanism),
        detail: format!(
            "best of {} alpha values: alpha = {:.6}, b' = {:.6} ({:?})",
            2 * n - 1,
            inc.alpha,
            inc.b,
            inc.source
        ),
        params,
        noise_level: inc.noise,
        source: Some(inc.source),
        c_bound: if c_bound.is_finite() { c_bound } else { effective_bound },
    })
}

/// Per-`alpha` candidates of the approximate-DP search, for inspection.
pub fn candidates_at_alpha(eps: f64, beta: f64, c_t: f64, c_bound: f64, alpha: f64, b_grid: usize) -> AlphaCandidates {
    SearchContext { eps, beta, c_t, c_bound }.candidates_at(alpha, b_grid)
}
