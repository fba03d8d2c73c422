//! Scenario documents (`advcal/1`).
//!
//! A document lists the sensitive attributes with their priors, the attacker
//! goal over them, the advantage bound and the mechanism. A goal that is a
//! list protects every listed set separately; an `and`/`or` node is a single
//! set whose attributes are guessed jointly.

use std::collections::BTreeSet;
use std::path::Path;

use advcal_core::composition::Regime;
use advcal_core::priors::{Location, Prior};
use advcal_core::{Combinator, Norm, NoiseKind};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: &str = "advcal/1";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: String,
    pub attributes: Vec<Attribute>,
    pub goal: GoalSpec,
    pub delta: f64,
    #[serde(default)]
    pub norm_p: Norm,
    #[serde(default)]
    pub mechanism: MechanismChoice,
    /// Query sensitivity per unit of input distance.
    #[serde(default = "unit")]
    pub sensitivity: f64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub window: WindowMode,
    #[serde(default)]
    pub bridge: Option<BridgeSection>,
    #[serde(default)]
    pub verify: Option<VerifyHints>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    pub prior: Prior,
    /// Largest distance between two values; defaults to the prior's own bound.
    #[serde(default, rename = "R")]
    pub range: Option<f64>,
    #[serde(default)]
    pub r: f64,
    /// The value to protect; absent means the worst case over all values.
    #[serde(default)]
    pub t: Option<Location>,
}

impl Attribute {
    pub fn range(&self) -> Result<f64> {
        self.range.or_else(|| self.prior.default_range()).ok_or_else(|| {
            CliError::Invalid(format!("attribute `{}` needs an explicit range R", self.name))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Goal {
    Attribute(String),
    And { and: Vec<Goal> },
    Or { or: Vec<Goal> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GoalSpec {
    /// Each set protected on its own; the noisiest requirement wins.
    Sets(Vec<Goal>),
    Single(Goal),
}

/// One sensitive set after flattening the goal tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalSet {
    pub attributes: Vec<String>,
    pub combinator: Combinator,
}

impl GoalSet {
    pub fn describe(&self) -> String {
        let sep = match self.combinator {
            Combinator::And => " AND ",
            Combinator::Or => " OR ",
        };
        self.attributes.join(sep)
    }
}

impl Goal {
    fn flatten(&self) -> Result<GoalSet> {
        let leaves = |goals: &[Goal], combinator: Combinator| -> Result<GoalSet> {
            if goals.is_empty() {
                return Err(CliError::Invalid("an and/or node needs at least one attribute".into()));
            }
            let attributes = goals
                .iter()
                .map(|g| match g {
                    Goal::Attribute(name) => Ok(name.clone()),
                    _ => Err(CliError::Invalid(
                        "nested and/or nodes are not supported; list the sets separately instead".into(),
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GoalSet { attributes, combinator })
        };
        match self {
            Goal::Attribute(name) => Ok(GoalSet { attributes: vec![name.clone()], combinator: Combinator::And }),
            Goal::And { and } => leaves(and, Combinator::And),
            Goal::Or { or } => leaves(or, Combinator::Or),
        }
    }
}

impl GoalSpec {
    pub fn sets(&self) -> Result<Vec<GoalSet>> {
        match self {
            GoalSpec::Single(goal) => Ok(vec![goal.flatten()?]),
            GoalSpec::Sets(goals) if goals.is_empty() => Err(CliError::Invalid("the goal list is empty".into())),
            GoalSpec::Sets(goals) => goals.iter().map(Goal::flatten).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismChoice {
    #[serde(flatten)]
    pub kind: NoiseKind,
    /// Smoothness of the sensitivity bound; Cauchy noise only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for MechanismChoice {
    fn default() -> Self {
        Self { kind: NoiseKind::Laplace, beta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "one_output")]
    pub count: usize,
    #[serde(default)]
    pub regime: Regime,
}

fn one_output() -> usize {
    1
}

impl Default for Outputs {
    fn default() -> Self {
        Self { count: 1, regime: Regime::Sequential }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Full windows for discrete attributes, a scan otherwise.
    #[default]
    Auto,
    Fixed(f64),
    Scan(usize),
}

impl std::str::FromStr for WindowMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (kind, value) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "auto" if value.is_empty() => Ok(WindowMode::Auto),
            "fixed" => value.parse().map(WindowMode::Fixed).map_err(|_| format!("bad window radius `{value}`")),
            "scan" => value.parse().map(WindowMode::Scan).map_err(|_| format!("bad scan size `{value}`")),
            _ => Err(format!("unknown window `{s}`; use auto, fixed:A or scan:N")),
        }
    }
}

impl std::fmt::Display for WindowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowMode::Auto => f.write_str("auto"),
            WindowMode::Fixed(a) => write!(f, "fixed:{a}"),
            WindowMode::Scan(n) => write!(f, "scan:{n}"),
        }
    }
}

/// A bound that may be given as a number or as `"inf"`.
pub fn bound_or_infinite<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }
    match Option::<Repr>::deserialize(d)? {
        None => Ok(None),
        Some(Repr::Number(x)) => Ok(Some(x)),
        Some(Repr::Text(s)) if matches!(s.as_str(), "inf" | "infinity") => Ok(Some(f64::INFINITY)),
        Some(Repr::Text(s)) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got `{s}`"))),
    }
}

/// Conversion between approximate DP and guessing advantage.
///
/// `p` and `q` default to the masses of the scenario's binding set.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "direction", rename_all = "snake_case", deny_unknown_fields)]
pub enum BridgeSection {
    DpToGaFixedDelta {
        eps: f64,
        delta: f64,
        delta_prime: f64,
        #[serde(default)]
        noise_scale: Option<f64>,
        #[serde(default)]
        c_t: f64,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        q: Option<f64>,
    },
    DpToGaFixedEps {
        eps: f64,
        delta: f64,
        eps_prime: f64,
        #[serde(default)]
        noise_scale: Option<f64>,
        #[serde(default)]
        c_t: f64,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        q: Option<f64>,
    },
    GaToDpProbabilistic {
        delta: f64,
    },
    GaToDpApproximateLaplace {
        #[serde(deserialize_with = "bound_or_infinite")]
        c_t: Option<f64>,
        #[serde(default, deserialize_with = "bound_or_infinite")]
        c_bound: Option<f64>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        q: Option<f64>,
    },
}

/// How to make a continuous attribute enumerable for verification.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyHints {
    pub bins: usize,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl ScenarioDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Invalid(format!(
                "unsupported schema `{}`; expected `{SCHEMA_VERSION}`",
                self.version
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Invalid(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if !(self.sensitivity > 0.0) || !self.sensitivity.is_finite() {
            return Err(CliError::Invalid(format!("sensitivity {} must be positive", self.sensitivity)));
        }
        if self.outputs.count == 0 {
            return Err(CliError::Invalid("outputs.count must be at least 1".into()));
        }
        if self.attributes.is_empty() {
            return Err(CliError::Invalid("no attributes declared".into()));
        }
        let mut names = BTreeSet::new();
        for attr in &self.attributes {
            if !names.insert(attr.name.as_str()) {
                return Err(CliError::Invalid(format!("attribute `{}` declared twice", attr.name)));
            }
            attr.prior.validate()?;
            let range = attr.range()?;
            if !(attr.r >= 0.0) || !(attr.r < range) {
                return Err(CliError::Invalid(format!(
                    "attribute `{}`: r = {} must lie in [0, R = {range})",
                    attr.name, attr.r
                )));
            }
        }
        for set in self.goal.sets()? {
            for name in &set.attributes {
                if !names.contains(name.as_str()) {
                    return Err(CliError::Invalid(format!("goal references undeclared attribute `{name}`")));
                }
            }
        }
        match self.window {
            WindowMode::Fixed(a) if !(a > 0.0) || !a.is_finite() => {
                return Err(CliError::Invalid(format!("fixed window {a} must be positive")))
            }
            WindowMode::Scan(0) => return Err(CliError::Invalid("a scan needs at least one point".into())),
            _ => {}
        }
        if let Some(hints) = &self.verify {
            if hints.bins < advcal_core::oracle::MIN_BINS {
                return Err(CliError::Invalid(format!(
                    "verify.bins = {} is below the minimum of {}",
                    hints.bins,
                    advcal_core::oracle::MIN_BINS
                )));
            }
        }
        Ok(())
    }

    pub fn attribute(&self, name: &str) -> &Attribute {
        self.attributes.iter().find(|a| a.name == name).expect("goal validated against attributes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": "advcal/1",
        "attributes": [{"name": "x", "prior": {"kind": "uniform", "length": 10}, "r": 1}],
        "goal": "x",
        "delta": 0.1
    }"#;

    #[test]
    fn minimal_document() {
        let doc = ScenarioDoc::from_json(MINIMAL).unwrap();
        assert_eq!(doc.norm_p, Norm::Inf);
        assert_eq!(doc.window, WindowMode::Auto);
        assert_eq!(doc.goal.sets().unwrap(), vec![GoalSet { attributes: vec!["x".into()], combinator: Combinator::And }]);
    }

    #[test]
    fn goal_shapes() {
        let parse = |g: &str| serde_json::from_str::<GoalSpec>(g).unwrap().sets();
        let or = parse(r#"{"or": ["a", "b"]}"#).unwrap();
        assert_eq!(or[0].combinator, Combinator::Or);
        assert_eq!(parse(r#"["a", {"and": ["b", "c"]}]"#).unwrap().len(), 2);
        assert!(parse(r#"{"or": ["a", {"and": ["b", "c"]}]}"#).is_err());
    }

    #[test]
    fn window_flags() {
        assert_eq!("scan:32".parse::<WindowMode>().unwrap(), WindowMode::Scan(32));
        assert_eq!("fixed:200".parse::<WindowMode>().unwrap(), WindowMode::Fixed(200.0));
        assert_eq!("auto".parse::<WindowMode>().unwrap(), WindowMode::Auto);
        assert!("scan".parse::<WindowMode>().is_err());
        let w: WindowMode = serde_json::from_str(r#"{"fixed": 20}"#).unwrap();
        assert_eq!(w, WindowMode::Fixed(20.0));
    }

    #[test]
    fn rejects_bad_documents() {
        let bad_version = MINIMAL.replace("advcal/1", "advcal/0");
        assert!(ScenarioDoc::from_json(&bad_version).is_err());
        let undeclared = MINIMAL.replace(r#""goal": "x""#, r#""goal": "y""#);
        assert!(ScenarioDoc::from_json(&undeclared).is_err());
        let bad_delta = MINIMAL.replace("0.1", "1.5");
        assert!(ScenarioDoc::from_json(&bad_delta).is_err());
    }

    #[test]
    fn infinite_bounds() {
        let b: BridgeSection = serde_json::from_str(
            r#"{"direction": "ga_to_dp_approximate_laplace", "c_t": "inf", "c_bound": "inf"}"#,
        )
        .unwrap();
        let BridgeSection::GaToDpApproximateLaplace { c_t, c_bound, .. } = b else { panic!() };
        assert_eq!(c_t, Some(f64::INFINITY));
        assert_eq!(c_bound, Some(f64::INFINITY));
    }
}
