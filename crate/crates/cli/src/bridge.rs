//! The `bridge` command: convert between approximate DP and guessing advantage.

use std::collections::BTreeMap;

use advcal_core::bridge::{
    dp_to_ga_fixed_delta, dp_to_ga_fixed_eps, ga_to_dp_approximate_laplace, ga_to_dp_probabilistic,
    ApproxLaplaceConfig, BridgeParams, BridgeStatus, CandidateSource,
};
use advcal_core::MechanismSpec;
use serde::Serialize;

use crate::calibrate::CalibrationReport;
use crate::doc::{BridgeSection, ScenarioDoc};
use crate::error::{CliError, Result};
use crate::render::Num;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeReport {
    pub direction: &'static str,
    pub status: BridgeStatus,
    /// Window masses used by the conversion.
    pub p: Num,
    pub q: Num,
    pub params: BTreeMap<&'static str, Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_level: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<CandidateSource>,
    pub detail: String,
}

impl BridgeReport {
    pub fn succeeded(&self) -> bool {
        self.status == BridgeStatus::Satisfied && self.noise_level.is_none_or(|n| n.0.is_finite())
    }
}

fn flatten(params: &BridgeParams) -> BTreeMap<&'static str, Num> {
    let mut out = BTreeMap::from([("eps", Num(params.eps)), ("delta", Num(params.delta))]);
    let optional = [
        ("eps_prime", params.eps_prime),
        ("delta_prime", params.delta_prime),
        ("avg_advantage", params.avg_advantage),
        ("chi_lo", params.chi_lo),
        ("chi_hi", params.chi_hi),
        ("alpha", params.alpha),
        ("b_prime", params.b_prime),
        ("beta", params.beta),
        ("d_of_delta", params.d_of_delta),
    ];
    out.extend(optional.into_iter().filter_map(|(k, v)| v.map(|v| (k, Num(v)))));
    out
}

pub fn run_bridge(doc: &ScenarioDoc, calibration: &CalibrationReport) -> Result<BridgeReport> {
    let section = doc
        .bridge
        .as_ref()
        .ok_or_else(|| CliError::Invalid("the scenario has no \"bridge\" section".into()))?;
    let binding = calibration.binding();
    let masses = |p: Option<f64>, q: Option<f64>| (p.unwrap_or(binding.p.0), q.unwrap_or(binding.q.0));

    let report = match section {
        BridgeSection::DpToGaFixedDelta { eps, delta, delta_prime, noise_scale, c_t, p, q }
        | BridgeSection::DpToGaFixedEps { eps, delta, eps_prime: delta_prime, noise_scale, c_t, p, q } => {
            let (p, q) = masses(*p, *q);
            let mech = MechanismSpec::laplace(noise_scale.unwrap_or(doc.sensitivity / eps))?;
            let (direction, bound) = match section {
                BridgeSection::DpToGaFixedDelta { .. } => {
                    ("dp_to_ga_fixed_delta", dp_to_ga_fixed_delta(*eps, *delta, p, q, &mech, *c_t, *delta_prime)?)
                }
                _ => ("dp_to_ga_fixed_eps", dp_to_ga_fixed_eps(*eps, *delta, p, q, &mech, *c_t, *delta_prime)?),
            };
            BridgeReport {
                direction,
                status: bound.status,
                p: Num(p),
                q: Num(q),
                params: flatten(&bound.params),
                noise_level: None,
                source: None,
                detail: bound.detail,
            }
        }
        BridgeSection::GaToDpProbabilistic { delta } => {
            if !calibration.feasible {
                return Err(CliError::Invalid("the pure calibration is infeasible; nothing to share".into()));
            }
            let res = ga_to_dp_probabilistic(*delta, calibration.epsilon.0)?;
            BridgeReport {
                direction: "ga_to_dp_probabilistic",
                status: if res.vacuous { BridgeStatus::Vacuous } else { BridgeStatus::Satisfied },
                p: binding.p,
                q: binding.q,
                params: BTreeMap::from([("eps", Num(res.eps)), ("delta", Num(res.delta))]),
                noise_level: Some(calibration.noise_scale),
                source: None,
                detail: if res.vacuous {
                    "delta >= 1: the guarantee may fail on every output".into()
                } else {
                    format!("the advantage bound holds except on outputs of probability {}", Num(*delta))
                },
            }
        }
        BridgeSection::GaToDpApproximateLaplace { c_t, c_bound, beta, p, q } => {
            let (p, q) = masses(*p, *q);
            let c_t = c_t.ok_or_else(|| CliError::Invalid("c_t must be finite".into()))?;
            let config = ApproxLaplaceConfig { beta: *beta, ..Default::default() };
            let res = ga_to_dp_approximate_laplace(doc.delta, p, q, c_t, c_bound.unwrap_or(f64::INFINITY), &config)?;
            let mut params = flatten(&res.params);
            params.insert("pure_epsilon", Num(res.pure_epsilon));
            params.insert("c_bound", Num(res.c_bound));
            BridgeReport {
                direction: "ga_to_dp_approximate_laplace",
                status: if res.noise_level.is_finite() { BridgeStatus::Satisfied } else { BridgeStatus::CannotSatisfy },
                p: Num(p),
                q: Num(q),
                params,
                noise_level: Some(Num(res.noise_level)),
                source: res.source,
                detail: res.detail,
            }
        }
    };
    Ok(report)
}

pub fn render_text(r: &BridgeReport) -> String {
    let mut out = format!("bridge {}: {:?} (p = {}, q = {})\n", r.direction, r.status, r.p, r.q);
    for (k, v) in &r.params {
        out.push_str(&format!("  {k} = {v}\n"));
    }
    if let Some(n) = r.noise_level {
        out.push_str(&format!("  noise level = {n}\n"));
    }
    if let Some(s) = r.source {
        out.push_str(&format!("  source = {s:?}\n"));
    }
    out.push_str(&format!("  {}\n", r.detail));
    out
}
