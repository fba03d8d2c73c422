//! Scenario → per-set epsilon → noise scale.
//!
//! Each goal set is calibrated against its worst target (every label
//! combination for discrete attributes without a target, the worst-case
//! location for continuous ones) and its best window. Separately protected
//! sets are combined by taking the largest noise.

use std::collections::BTreeMap;

use advcal_core::advantage::{epsilon_one_sided, epsilon_two_sided, smallest_feasible_window};
use advcal_core::composition::{dual_norm_compose, partition_budget, Regime};
use advcal_core::multivariate::{and_event_epsilon_with_norm, or_event_epsilon_with_norm};
use advcal_core::priors::{worst_discrete_prior, Location, Prior};
use advcal_core::{
    BindingSide, CalibrationError, Combinator, EpsilonResult, MechanismSpec, NoiseKind, Norm, SensitiveItem,
    SensitiveSet, PROB_TOL,
};
use serde::Serialize;

use crate::doc::{Attribute, GoalSet, ScenarioDoc, WindowMode, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::render::Num;
use crate::verify::VerificationReport;

pub const AUTO_SCAN_POINTS: usize = 64;
/// Beyond this many label combinations only the worst-case candidates are tried.
pub const MAX_TARGET_COMBINATIONS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetReport {
    pub goal: String,
    pub combinator: Combinator,
    /// Attribute → protected value of the binding target.
    pub targets: BTreeMap<String, String>,
    pub p: Num,
    pub q: Num,
    /// Window radius per attribute.
    pub windows: Vec<Num>,
    /// Distance in the DP exponent.
    pub distance: Num,
    pub epsilon: Num,
    pub feasible: bool,
    pub vacuous: bool,
    pub side: BindingSide,
    pub ln_argument: Num,
    pub per_output_epsilon: Num,
    pub noise_scale: Num,
    pub targets_evaluated: usize,
    pub windows_evaluated: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismReport {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub scale: Num,
    pub sensitivity: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputsReport {
    pub count: usize,
    pub regime: Regime,
    pub per_output_epsilon: Num,
    /// Per-output budgets composed back with the dual norm.
    pub composed_epsilon: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub version: &'static str,
    pub delta: Num,
    pub norm_p: Norm,
    pub window: String,
    pub sets: Vec<SetReport>,
    /// Index of the set that needs the most noise.
    pub binding_set: usize,
    pub epsilon: Num,
    pub noise_scale: Num,
    pub mechanism: MechanismReport,
    pub outputs: OutputsReport,
    pub feasible: bool,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
}

impl CalibrationReport {
    pub fn binding(&self) -> &SetReport {
        &self.sets[self.binding_set]
    }
}

/// The mechanism that releases one output at `per_output_epsilon`.
pub fn mechanism_for(doc: &ScenarioDoc, per_output_epsilon: f64) -> Result<Option<MechanismSpec>> {
    if per_output_epsilon.is_infinite() {
        return Ok(None);
    }
    let spec = match doc.mechanism.kind {
        NoiseKind::Laplace => {
            let scale = if per_output_epsilon > 0.0 { doc.sensitivity / per_output_epsilon } else { f64::INFINITY };
            MechanismSpec::laplace(scale)?
        }
        NoiseKind::GenCauchy { gamma } => {
            let beta = doc.mechanism.beta.unwrap_or(per_output_epsilon / (2.0 * gamma));
            MechanismSpec::gen_cauchy(gamma, per_output_epsilon, beta, doc.sensitivity)?
        }
    };
    Ok(Some(spec))
}

fn describe(loc: &Location) -> String {
    match loc {
        Location::Label(l) => l.clone(),
        Location::Value(v) => format!("{}", Num(*v)),
    }
}

/// Candidate targets for one attribute.
pub(crate) fn target_options(attr: &Attribute, delta: f64, reduce: bool) -> Result<Vec<Location>> {
    if let Some(t) = &attr.t {
        return Ok(vec![t.clone()]);
    }
    Ok(match &attr.prior {
        Prior::Discrete { points } if reduce => {
            let masses: Vec<f64> = points.iter().map(|(_, m)| *m).collect();
            let picks = worst_discrete_prior(&masses, delta)?.candidates();
            points
                .iter()
                .filter(|(_, m)| picks.contains(m))
                .map(|(l, _)| Location::Label(l.clone()))
                .collect()
        }
        Prior::Discrete { points } => points.iter().map(|(l, _)| Location::Label(l.clone())).collect(),
        Prior::Uniform { .. } | Prior::Normal { .. } => vec![attr.prior.worst_case_location(attr.r, delta)?],
        Prior::WorstCase { .. } => vec![Location::Value(0.0)],
    })
}

pub(crate) fn cartesian(options: &[Vec<Location>]) -> Vec<Vec<Location>> {
    options.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut next = prefix.clone();
                    next.push(o.clone());
                    next
                })
            })
            .collect()
    })
}

fn window_options(attrs: &[&Attribute], mode: WindowMode) -> Result<Vec<Vec<f64>>> {
    let ranges = attrs.iter().map(|a| a.range()).collect::<Result<Vec<_>>>()?;
    let all_discrete = attrs.iter().all(|a| a.prior.is_discrete());
    let scan = |n: usize| -> Vec<Vec<f64>> {
        (1..=n)
            .map(|k| {
                attrs
                    .iter()
                    .zip(&ranges)
                    .map(|(attr, &range)| {
                        if attr.prior.is_discrete() || k == n {
                            range
                        } else {
                            attr.r + k as f64 * (range - attr.r) / n as f64
                        }
                    })
                    .collect()
            })
            .collect()
    };
    Ok(match mode {
        WindowMode::Fixed(a) => vec![ranges.iter().map(|&range| a.min(range)).collect()],
        WindowMode::Scan(n) => scan(n),
        WindowMode::Auto if all_discrete => vec![ranges],
        WindowMode::Auto => scan(AUTO_SCAN_POINTS),
    })
}

struct Candidate {
    result: EpsilonResult,
    windows: Vec<f64>,
}

fn evaluate(set: &SensitiveSet, delta: f64, windows: &[f64], norm: Norm) -> std::result::Result<EpsilonResult, CalibrationError> {
    if set.items.len() == 1 {
        let m = set.masses(delta, windows)?[0];
        return if m.q >= 1.0 - PROB_TOL {
            epsilon_two_sided(m.p, delta, m.a)
        } else {
            epsilon_one_sided(m.p, m.q, delta, m.a)
        };
    }
    match set.combinator {
        Combinator::And => and_event_epsilon_with_norm(set, delta, windows, norm),
        Combinator::Or => or_event_epsilon_with_norm(set, delta, windows, norm).map(|(r, _)| r),
    }
}

/// Better window for the same target: feasible beats infeasible, then larger
/// epsilon, then (among infeasible ones) the smaller ln-argument.
fn better_window(new: &EpsilonResult, old: &EpsilonResult) -> bool {
    match (new.feasible, old.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => new.epsilon > old.epsilon,
        (false, false) => new.ln_argument < old.ln_argument,
    }
}

/// Worse target: infeasible beats feasible, then smaller epsilon.
fn worse_target(new: &EpsilonResult, old: &EpsilonResult) -> bool {
    match (new.feasible, old.feasible) {
        (false, true) => true,
        (true, false) => false,
        (true, true) => new.epsilon < old.epsilon,
        (false, false) => new.ln_argument > old.ln_argument,
    }
}

pub fn calibrate_set(doc: &ScenarioDoc, goal: &GoalSet, mode: WindowMode) -> Result<SetReport> {
    let attrs: Vec<&Attribute> = goal.attributes.iter().map(|n| doc.attribute(n)).collect();
    let mut options = attrs.iter().map(|a| target_options(a, doc.delta, false)).collect::<Result<Vec<_>>>()?;
    if options.iter().map(Vec::len).product::<usize>() > MAX_TARGET_COMBINATIONS {
        options = attrs.iter().map(|a| target_options(a, doc.delta, true)).collect::<Result<Vec<_>>>()?;
    }
    let windows = window_options(&attrs, mode)?;
    let mut notes = Vec::new();

    let mut worst: Option<(Candidate, Vec<Location>)> = None;
    let mut targets_evaluated = 0;
    let mut skipped = 0;
    for targets in cartesian(&options) {
        let items = attrs
            .iter()
            .zip(&targets)
            .map(|(attr, t)| {
                Ok(SensitiveItem {
                    id: attr.name.clone(),
                    t: t.clone(),
                    r: attr.r,
                    prior: attr.prior.clone(),
                    range: attr.range()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let set = SensitiveSet::new(items, goal.combinator)?;
        let mut best: Option<Candidate> = None;
        for w in &windows {
            let result = match evaluate(&set, doc.delta, w, doc.norm_p) {
                Ok(r) => r,
                Err(CalibrationError::EmptyWindow { .. } | CalibrationError::InvalidWindow(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if best.as_ref().is_none_or(|b| better_window(&result, &b.result)) {
                best = Some(Candidate { result, windows: w.clone() });
            }
        }
        targets_evaluated += 1;
        let Some(best) = best else { continue };
        if worst.as_ref().is_none_or(|(w, _)| worse_target(&best.result, &w.result)) {
            worst = Some((best, targets));
        }
    }
    if skipped > 0 {
        notes.push(format!("{skipped} window(s) skipped: the window adds no mass beyond the correct guess"));
    }
    let Some((cand, targets)) = worst else {
        return Err(CliError::Invalid(format!(
            "goal `{}`: no window in mode {mode} leaves room for a wrong guess; widen the window",
            goal.describe()
        )));
    };
    let res = &cand.result;

    if !res.feasible {
        notes.push(format!(
            "infeasible: ln argument {} >= 1 at p = {}, q = {}; the window must satisfy q >= p / (delta + p) = {}",
            Num(res.ln_argument),
            Num(res.p),
            Num(res.q),
            Num(res.p / (doc.delta + res.p)),
        ));
        if attrs.len() == 1 && attrs[0].prior.is_continuous() {
            let attr = attrs[0];
            if let Some(a) = smallest_feasible_window(&attr.prior, &targets[0], attr.r, doc.delta, attr.range()?, 1e-9)? {
                notes.push(format!(
                    "smallest feasible window a = {}; rerun with --window scan:{AUTO_SCAN_POINTS}",
                    Num(a)
                ));
            } else {
                notes.push("no window up to the range R is feasible".into());
            }
        }
    }
    let vacuous = res.is_vacuous();
    if vacuous {
        notes.push(format!("vacuous: {}", res.detail));
    }

    let per_output = if res.feasible {
        partition_budget(res.epsilon, doc.outputs.count, doc.outputs.regime)?[0]
    } else {
        0.0
    };
    let noise_scale = if !res.feasible {
        f64::INFINITY
    } else {
        mechanism_for(doc, per_output)?.map_or(0.0, |m| m.scale)
    };

    Ok(SetReport {
        goal: goal.describe(),
        combinator: goal.combinator,
        targets: attrs.iter().zip(&targets).map(|(a, t)| (a.name.clone(), describe(t))).collect(),
        p: Num(res.p),
        q: Num(res.q),
        windows: cand.windows.iter().copied().map(Num).collect(),
        distance: Num(res.a),
        epsilon: Num(if res.feasible { res.epsilon } else { res.signed_epsilon() }),
        feasible: res.feasible,
        vacuous,
        side: res.side,
        ln_argument: Num(res.ln_argument),
        per_output_epsilon: Num(per_output),
        noise_scale: Num(noise_scale),
        targets_evaluated,
        windows_evaluated: windows.len(),
        notes,
    })
}

pub fn calibrate(doc: &ScenarioDoc, window_override: Option<WindowMode>) -> Result<CalibrationReport> {
    let mode = window_override.unwrap_or(doc.window);
    let goals = doc.goal.sets()?;
    let sets = goals.iter().map(|g| calibrate_set(doc, g, mode)).collect::<Result<Vec<_>>>()?;

    let feasible = sets.iter().all(|s| s.feasible);
    let binding_set = (0..sets.len())
        .max_by(|&i, &j| {
            let key = |s: &SetReport| (!s.feasible, s.noise_scale.0);
            key(&sets[i]).partial_cmp(&key(&sets[j])).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i))
        })
        .unwrap_or(0);
    let binding = &sets[binding_set];
    let epsilon = binding.epsilon.0;
    let per_output = binding.per_output_epsilon.0;

    let mut notes = Vec::new();
    if sets.len() > 1 {
        notes.push(format!(
            "{} sets protected separately; set {} (`{}`) needs the most noise",
            sets.len(),
            binding_set + 1,
            binding.goal
        ));
    }
    if !feasible {
        notes.push("at least one set has no positive epsilon; no noise scale can be issued".into());
    }

    let spec = if feasible { mechanism_for(doc, per_output)? } else { None };
    let mechanism = MechanismReport {
        kind: doc.mechanism.kind,
        scale: Num(binding.noise_scale.0),
        sensitivity: Num(doc.sensitivity),
        b: spec.as_ref().and_then(|m| m.b).map(Num),
        beta: spec.as_ref().and_then(|m| m.b.map(|_| m.beta)).map(Num),
    };
    let composed = if feasible && per_output.is_finite() {
        let budgets = vec![per_output; doc.outputs.count];
        dual_norm_compose(&budgets, doc.outputs.regime.input_norm())?
    } else {
        epsilon
    };

    Ok(CalibrationReport {
        version: SCHEMA_VERSION,
        delta: Num(doc.delta),
        norm_p: doc.norm_p,
        window: mode.to_string(),
        binding_set,
        epsilon: Num(epsilon),
        noise_scale: binding.noise_scale,
        mechanism,
        outputs: OutputsReport {
            count: doc.outputs.count,
            regime: doc.outputs.regime,
            per_output_epsilon: Num(per_output),
            composed_epsilon: Num(composed),
        },
        feasible,
        notes,
        verification: None,
        sets,
    })
}

pub fn render_text(report: &CalibrationReport) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!(
        "delta = {}, norm = {}, window = {}",
        report.delta, report.norm_p, report.window
    ));
    for (i, s) in report.sets.iter().enumerate() {
        line(format!("set {}: {}", i + 1, s.goal));
        let targets: Vec<String> = s.targets.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        line(format!("  target: {}", targets.join(", ")));
        let windows: Vec<String> = s.windows.iter().map(|w| w.to_string()).collect();
        line(format!("  p = {}, q = {}, windows = [{}], distance = {}", s.p, s.q, windows.join(", "), s.distance));
        if s.feasible {
            line(format!("  epsilon = {} ({} side), noise scale = {}", s.epsilon, format!("{:?}", s.side).to_lowercase(), s.noise_scale));
        } else {
            line(format!("  INFEASIBLE: ln argument = {}", s.ln_argument));
        }
        for n in &s.notes {
            line(format!("  note: {n}"));
        }
    }
    if report.feasible {
        line(format!(
            "epsilon = {}, {} noise scale = {} ({} output(s), {}, per-output epsilon {})",
            report.epsilon,
            match report.mechanism.kind {
                NoiseKind::Laplace => "laplace".to_string(),
                NoiseKind::GenCauchy { gamma } => format!("gen-cauchy(gamma = {gamma})"),
            },
            report.noise_scale,
            report.outputs.count,
            format!("{:?}", report.outputs.regime).to_lowercase(),
            report.outputs.per_output_epsilon,
        ));
    } else {
        line("result: INFEASIBLE".into());
    }
    for n in &report.notes {
        line(format!("note: {n}"));
    }
    if let Some(v) = &report.verification {
        out.push_str(&crate::verify::render_text(v));
    }
    out
}
