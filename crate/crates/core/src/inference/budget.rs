//! Budgeted calibration: pick the best operating point the budget allows.
//!
//! Protocol: sweep the policy parameter over a fixed grid on the
//! *validation* split (thresholds: 201 evenly spaced values in [0, 1];
//! patience: every t in 1..=K). For each budget keep the candidates whose
//! mean validation cost fits, choose the one with the best validation
//! metric (ties: lower cost, then smaller parameter), and report that
//! frozen choice measured on the *test* split. Choosing on validation
//! keeps the test metric honest; the realized test cost may land slightly
//! above the budget and is reported as-is.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::inference::confidence::Criterion;
use crate::inference::policy::ExitPolicy;
use crate::inference::table::{operating_point_from_table, ExitTable, OperatingPoint};
use crate::multiexit::cost::CostModel;
use crate::multiexit::model::{Labels, Task};

/// A compute allowance as a fraction of full-network cost, or none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Fraction(f64),
    Unlimited,
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if let Budget::Fraction(f) = self {
            if !(f.is_finite() && *f > 0.0 && *f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "budget fraction must lie in (0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Fraction(b) => write!(f, "{}%", b * 100.0),
            Budget::Unlimited => write!(f, "unlimited"),
        }
    }
}

/// The standard report: quarter steps of the full budget plus an
/// unconstrained column.
pub fn standard_budgets() -> Vec<Budget> {
    vec![
        Budget::Fraction(0.25),
        Budget::Fraction(0.5),
        Budget::Fraction(0.75),
        Budget::Fraction(1.0),
        Budget::Unlimited,
    ]
}

/// Which policy family the calibration sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyFamily {
    MaxProb,
    NormEntropy,
    Patience,
}

impl PolicyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyFamily::MaxProb => "max_prob",
            PolicyFamily::NormEntropy => "norm_entropy",
            PolicyFamily::Patience => "patience",
        }
    }
}

impl FromStr for PolicyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_prob" => Ok(PolicyFamily::MaxProb),
            "norm_entropy" => Ok(PolicyFamily::NormEntropy),
            "patience" => Ok(PolicyFamily::Patience),
            _ => Err(Error::UnsupportedCriterion(format!(
                "{s:?} (expected max_prob, norm_entropy, or patience)"
            ))),
        }
    }
}

/// The fixed threshold grid: 201 evenly spaced values covering [0, 1].
pub fn threshold_grid() -> Vec<f64> {
    (0..=200).map(|i| i as f64 / 200.0).collect()
}

/// Population standard deviation of regression targets; the patience
/// agreement tolerance is a tenth of it.
fn target_std(labels: &Labels) -> f64 {
    match labels {
        Labels::Values(v) => {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
        }
        Labels::Classes(_) => 0.0,
    }
}

/// Every candidate policy of the family for the given table (thresholds
/// over the fixed grid, or patience t = 1..=K with the regression
/// tolerance derived from the validation targets).
pub fn candidate_policies(family: PolicyFamily, val: &ExitTable) -> Result<Vec<ExitPolicy>> {
    match family {
        PolicyFamily::MaxProb | PolicyFamily::NormEntropy => {
            if matches!(val.task, Task::Regression) {
                return Err(Error::UnsupportedCriterion(
                    "probability criteria need classification logits".into(),
                ));
            }
            let criterion = match family {
                PolicyFamily::MaxProb => Criterion::MaxProb,
                _ => Criterion::NormEntropy,
            };
            Ok(threshold_grid()
                .into_iter()
                .map(|tau| ExitPolicy::Threshold { criterion, tau })
                .collect())
        }
        PolicyFamily::Patience => {
            let agree_tol = match val.task {
                Task::Regression => Some(0.1 * target_std(&val.labels)),
                Task::Classification { .. } => None,
            };
            Ok((1..=val.k).map(|t| ExitPolicy::Patience { t, agree_tol }).collect())
        }
    }
}

/// One calibrated budget row.
#[derive(Debug, Clone)]
pub struct BudgetRow {
    pub budget: Budget,
    pub policy: ExitPolicy,
    pub val_metric: f64,
    pub val_cost: f64,
    pub test_metric: f64,
    pub test_cost: f64,
    /// Test-split exit histogram under the chosen policy.
    pub test_histogram: Vec<usize>,
}

impl BudgetRow {
    pub fn parameter(&self) -> f64 {
        self.policy.parameter()
    }
}

/// The full calibrated table for one policy family.
#[derive(Debug, Clone)]
pub struct BudgetReport {
    pub family: PolicyFamily,
    pub rows: Vec<BudgetRow>,
}

/// Is candidate `a` strictly better than `b` on the validation split?
/// Primary: metric (direction by task); ties: lower cost, then smaller
/// parameter.
fn better(higher_is_better: bool, a: &OperatingPoint, b: &OperatingPoint) -> bool {
    if a.metric != b.metric {
        return if higher_is_better { a.metric > b.metric } else { a.metric < b.metric };
    }
    if a.mean_cost != b.mean_cost {
        return a.mean_cost < b.mean_cost;
    }
    a.parameter < b.parameter
}

/// Sweeps the family's parameter grid on the validation table, picks the
/// best feasible point per budget, and reports those choices measured on
/// the test table.
pub fn calibrate_budgets(
    family: PolicyFamily,
    val: &ExitTable,
    test: &ExitTable,
    cm: &CostModel,
    budgets: &[Budget],
) -> Result<BudgetReport> {
    if budgets.is_empty() {
        return Err(Error::InvalidParameter("no budgets requested".into()));
    }
    for b in budgets {
        b.validate()?;
    }
    if val.task != test.task || val.k != test.k {
        return Err(Error::LayoutMismatch(
            "validation and test tables describe different models".into(),
        ));
    }
    let policies = candidate_policies(family, val)?;
    let val_points: Vec<OperatingPoint> =
        exec::map_indexed(policies.len(), |i| operating_point_from_table(val, &policies[i], cm))
            .into_iter()
            .collect::<Result<_>>()?;
    let higher = val.task.higher_is_better();
    let cheapest = val_points
        .iter()
        .map(|p| p.mean_cost)
        .fold(f64::INFINITY, f64::min);

    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let mut best: Option<usize> = None;
        for (i, point) in val_points.iter().enumerate() {
            if let Budget::Fraction(limit) = budget {
                if point.mean_cost > limit {
                    continue;
                }
            }
            match best {
                None => best = Some(i),
                Some(j) if better(higher, point, &val_points[j]) => best = Some(i),
                Some(_) => {}
            }
        }
        let Some(choice) = best else {
            let Budget::Fraction(limit) = budget else { unreachable!() };
            return Err(Error::InfeasibleBudget { budget: limit, cheapest });
        };
        let test_point = operating_point_from_table(test, &policies[choice], cm)?;
        rows.push(BudgetRow {
            budget,
            policy: policies[choice],
            val_metric: val_points[choice].metric,
            val_cost: val_points[choice].mean_cost,
            test_metric: test_point.metric,
            test_cost: test_point.mean_cost,
            test_histogram: test_point.histogram,
        });
    }
    Ok(BudgetReport { family, rows })
}
