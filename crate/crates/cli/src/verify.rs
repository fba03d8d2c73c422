//! Independent check of a calibrated epsilon by exact posterior enumeration.
//!
//! The query is the one that separates the protected event best: for discrete
//! attributes it outputs 0 on the target and `sensitivity` elsewhere; for a
//! single continuous attribute it outputs `sensitivity * x` on a binned prior.

use advcal_core::oracle::{discretize_continuous, max_advantage, DiscreteScenario, OraclePoint, OutputGrid};
use advcal_core::priors::{Location, Prior};
use advcal_core::Combinator;
use serde::Serialize;

use crate::calibrate::{cartesian, mechanism_for, target_options};
use crate::doc::{Attribute, GoalSet, ScenarioDoc};
use crate::error::{CliError, Result};
use crate::render::Num;

/// Most target combinations checked per set; beyond it only worst-case candidates.
pub const MAX_VERIFY_TARGETS: usize = 64;
/// Most joint points enumerated per set.
pub const MAX_JOINT_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub epsilon: Num,
    pub delta: Num,
    pub slack: Num,
    pub max_advantage: Num,
    /// Goal and target where the largest advantage was found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<String>,
    pub targets_checked: usize,
    pub grid_points: usize,
    pub notes: Vec<String>,
}

struct Check {
    advantage: f64,
    slack: f64,
    grid_points: usize,
}

fn run(points: Vec<OraclePoint>, doc: &ScenarioDoc, epsilon: f64) -> Result<Option<Check>> {
    let targets = points.iter().filter(|p| p.target && p.mass > 0.0).count();
    let others = points.iter().filter(|p| !p.target && p.mass > 0.0).count();
    if targets == 0 || others == 0 {
        // The guess is already certain (or impossible): nothing to gain.
        return Ok(None);
    }
    let Some(mech) = mechanism_for(doc, epsilon)? else {
        return Ok(None);
    };
    let scenario = DiscreteScenario::new(points, mech)?;
    let grid = OutputGrid::for_scenario(&scenario);
    let report = max_advantage(&scenario, &grid)?;
    Ok(Some(Check { advantage: report.max_advantage, slack: report.slack, grid_points: report.evaluated }))
}

fn discrete_points(attrs: &[&Attribute]) -> Result<Vec<(Vec<String>, f64)>> {
    let mut joint: Vec<(Vec<String>, f64)> = vec![(Vec::new(), 1.0)];
    for attr in attrs {
        let Prior::Discrete { points } = &attr.prior else { unreachable!() };
        joint = joint
            .iter()
            .flat_map(|(labels, mass)| {
                points.iter().map(move |(l, m)| {
                    let mut next = labels.clone();
                    next.push(l.clone());
                    (next, mass * m)
                })
            })
            .collect();
        if joint.len() > MAX_JOINT_POINTS {
            return Err(CliError::Invalid(format!(
                "more than {MAX_JOINT_POINTS} joint points; too many to enumerate"
            )));
        }
    }
    Ok(joint)
}

fn hits(combinator: Combinator, labels: &[String], targets: &[Location]) -> bool {
    let mut matches = labels.iter().zip(targets).map(|(l, t)| matches!(t, Location::Label(x) if x == l));
    match combinator {
        Combinator::And => matches.all(|m| m),
        Combinator::Or => matches.any(|m| m),
    }
}

fn continuous_bounds(doc: &ScenarioDoc, attr: &Attribute) -> Result<(usize, f64, f64)> {
    let hints = doc.verify.ok_or_else(|| {
        CliError::Invalid(format!(
            "attribute `{}` is continuous; add \"verify\": {{\"bins\": N}} to enumerate it",
            attr.name
        ))
    })?;
    let (lo, hi) = match &attr.prior {
        Prior::Normal { mu, sigma, .. } => {
            let half = 3.0 * std::f64::consts::SQRT_2 * sigma;
            (mu - half, mu + half)
        }
        Prior::Uniform { start, length } => (*start, start + length),
        _ => unreachable!(),
    };
    Ok((hints.bins, hints.lo.unwrap_or(lo), hints.hi.unwrap_or(hi)))
}

fn verify_set(doc: &ScenarioDoc, goal: &GoalSet, epsilon: f64, notes: &mut Vec<String>) -> Result<Vec<(String, Check)>> {
    let attrs: Vec<&Attribute> = goal.attributes.iter().map(|n| doc.attribute(n)).collect();
    let mut out = Vec::new();

    if attrs.iter().all(|a| a.prior.is_discrete()) {
        let joint = discrete_points(&attrs)?;
        let mut options = attrs.iter().map(|a| target_options(a, doc.delta, false)).collect::<Result<Vec<_>>>()?;
        if options.iter().map(Vec::len).product::<usize>() > MAX_VERIFY_TARGETS {
            options = attrs.iter().map(|a| target_options(a, doc.delta, true)).collect::<Result<Vec<_>>>()?;
        }
        for targets in cartesian(&options) {
            let points = joint
                .iter()
                .map(|(labels, mass)| {
                    let target = hits(goal.combinator, labels, &targets);
                    OraclePoint {
                        label: Location::Label(labels.join("|")),
                        mass: *mass,
                        output: if target { 0.0 } else { doc.sensitivity },
                        target,
                    }
                })
                .collect();
            let name: Vec<String> = attrs
                .iter()
                .zip(&targets)
                .map(|(a, t)| format!("{} = {}", a.name, match t {
                    Location::Label(l) => l.clone(),
                    Location::Value(v) => v.to_string(),
                }))
                .collect();
            if let Some(check) = run(points, doc, epsilon)? {
                out.push((format!("{}: {}", goal.describe(), name.join(", ")), check));
            }
        }
        return Ok(out);
    }

    if let [attr] = attrs[..] {
        if matches!(attr.prior, Prior::Normal { .. } | Prior::Uniform { .. }) {
            let (bins, lo, hi) = continuous_bounds(doc, attr)?;
            let disc = discretize_continuous(&attr.prior, bins, lo, hi)?;
            let t = target_options(attr, doc.delta, false)?[0]
                .as_value()
                .ok_or_else(|| CliError::Invalid(format!("attribute `{}` needs a numeric target", attr.name)))?;
            notes.push(format!(
                "`{}` binned into {bins} bins over [{}, {}] holding {} of the prior; largest bin mass {}",
                attr.name,
                Num(lo),
                Num(hi),
                Num(disc.captured_mass),
                Num(disc.max_bin_mass)
            ));
            let points = disc
                .points
                .iter()
                .map(|&(x, mass)| OraclePoint {
                    label: Location::Value(x),
                    mass,
                    output: doc.sensitivity * x,
                    target: (x - t).abs() <= attr.r,
                })
                .collect();
            if let Some(check) = run(points, doc, epsilon)? {
                out.push((format!("{}: {} = {}", goal.describe(), attr.name, Num(t)), check));
            }
            return Ok(out);
        }
    }

    Err(CliError::Invalid(format!(
        "goal `{}` cannot be verified: only all-discrete goals and single continuous attributes \
         (uniform or normal) can be enumerated",
        goal.describe()
    )))
}

/// Check that a mechanism calibrated to `epsilon` keeps every goal's advantage
/// within `delta` (plus the grid slack).
pub fn verify(doc: &ScenarioDoc, epsilon: f64) -> Result<VerificationReport> {
    let mut notes = Vec::new();
    let mut report = VerificationReport {
        verdict: Verdict::Pass,
        epsilon: Num(epsilon),
        delta: Num(doc.delta),
        slack: Num(0.0),
        max_advantage: Num(0.0),
        worst: None,
        targets_checked: 0,
        grid_points: 0,
        notes: Vec::new(),
    };
    if epsilon.is_infinite() {
        notes.push("epsilon is infinite: the bound is vacuous and holds without noise".into());
        report.notes = notes;
        return Ok(report);
    }
    if !(epsilon >= 0.0) {
        return Err(CliError::Invalid(format!("cannot verify epsilon {epsilon}")));
    }
    for goal in doc.goal.sets()? {
        for (name, check) in verify_set(doc, &goal, epsilon, &mut notes)? {
            report.targets_checked += 1;
            report.grid_points += check.grid_points;
            report.slack = Num(check.slack);
            if report.worst.is_none() || check.advantage > report.max_advantage.0 {
                report.max_advantage = Num(check.advantage);
                report.worst = Some(name);
            }
        }
    }
    if report.targets_checked == 0 {
        notes.push("every target is certain or impossible under the prior: advantage is 0".into());
    }
    if report.max_advantage.0 > doc.delta + report.slack.0 {
        report.verdict = Verdict::Fail;
    }
    report.notes = notes;
    Ok(report)
}

pub fn render_text(v: &VerificationReport) -> String {
    let mut out = format!(
        "verification: {:?} at epsilon = {}: max advantage {} vs delta {} (+ slack {}) over {} target(s)\n",
        v.verdict, v.epsilon, v.max_advantage, v.delta, v.slack, v.targets_checked
    )
    .replace("Pass", "PASS")
    .replace("Fail", "FAIL");
    if let Some(w) = &v.worst {
        out.push_str(&format!("  worst: {w}\n"));
    }
    for n in &v.notes {
        out.push_str(&format!("  note: {n}\n"));
    }
    out
}
