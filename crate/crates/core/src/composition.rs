//! Budgets over several query outputs.
//!
//! If the `m` outputs are each `epsilon_i`-DP w.r.t. their own input and the
//! inputs are combined with an `l_p` norm, the joint mechanism is
//! `||epsilon||_q`-DP where `l_q` is the dual norm. `p = inf` (every input may
//! change) gives the sequential sum; `p = 1` (one input changes) gives the
//! parallel maximum.

use serde::{Deserialize, Serialize};

use crate::error::{CalibrationError, Result};
use crate::multivariate::Norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Every output may be affected: budgets add up.
    #[default]
    Sequential,
    /// Exactly one output is affected: the largest budget counts.
    Parallel,
}

impl Regime {
    /// The input norm that yields this regime.
    pub fn input_norm(&self) -> Norm {
        match self {
            Regime::Sequential => Norm::Inf,
            Regime::Parallel => Norm::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetVector {
    pub eps: Vec<f64>,
    pub input_norm: Norm,
}

impl BudgetVector {
    pub fn new(eps: Vec<f64>, input_norm: Norm) -> Result<Self> {
        check_budgets(&eps)?;
        Ok(Self { eps, input_norm })
    }

    pub fn total(&self) -> f64 {
        dual_norm(&self.eps, self.input_norm)
    }
}

fn check_budgets(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(CalibrationError::InvalidArgument("no budgets to compose".into()));
    }
    if let Some(e) = eps.iter().find(|e| !(**e >= 0.0)) {
        return Err(CalibrationError::InvalidArgument(format!(
            "budget {e} must be non-negative"
        )));
    }
    Ok(())
}

fn dual_norm(eps: &[f64], input_norm: Norm) -> f64 {
    input_norm.dual().combine(eps)
}

/// `sum epsilon_i`.
pub fn sequential_compose(eps: &[f64]) -> Result<f64> {
    check_budgets(eps)?;
    Ok(eps.iter().sum())
}

/// `||epsilon||_q` with `l_q` dual to the input norm.
pub fn dual_norm_compose(eps: &[f64], input_norm: Norm) -> Result<f64> {
    check_budgets(eps)?;
    Ok(dual_norm(eps, input_norm))
}

/// Equal split of a total budget over `m` outputs.
pub fn partition_budget(total: f64, m: usize, regime: Regime) -> Result<Vec<f64>> {
    if !(total >= 0.0) {
        return Err(CalibrationError::InvalidArgument(format!(
            "total budget {total} must be non-negative"
        )));
    }
    if m == 0 {
        return Err(CalibrationError::InvalidArgument("need at least one output".into()));
    }
    let each = match regime {
        Regime::Sequential => total / m as f64,
        Regime::Parallel => total,
    };
    Ok(vec![each; m])
}
