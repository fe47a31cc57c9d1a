use serde::{Deserialize, Serialize};

use super::learners::fit_stack;
use super::nuisance::{adjustment_features, AdjustmentSet, NuisanceConfig};
use super::DrError;
use crate::numkernel::{mean, variance};
use crate::spatialdata::SpatialDataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// `a ↦ a + δ`; reports the change in mean outcome.
    Shift(f64),
    /// `a ↦ min(a, c)`; reports the ratio of mean outcomes.
    Cap(f64),
    Identity,
}

impl Policy {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Self::Shift(d) => a + d,
            Self::Cap(c) => a.min(c),
            Self::Identity => a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyEstimate {
    pub policy: Policy,
    pub value: f64,
    /// Units moved more than one bandwidth outside the observed exposure
    /// range.
    pub positivity_violations: usize,
    pub bandwidth: f64,
}

/// Outcome-regression plug-in for an exposure policy `q`, with the observed
/// residual added back: `mean(Y + μ̂(w, q(a)) − μ̂(w, a))`. No density
/// correction is applied.
pub fn policy_effect(
    d: &SpatialDataset,
    adjust: AdjustmentSet,
    a_c: Option<&[f64]>,
    policy: Policy,
    config: &NuisanceConfig,
) -> Result<PolicyEstimate, DrError> {
    let y = d.outcome().ok_or(DrError::MissingOutcome)?;
    let a = d.exposure();
    let n = d.n();
    let f = adjustment_features(d, adjust, a_c)?;
    let w: Vec<&[f64]> = f.rows.iter().map(|r| r.as_slice()).collect();
    let mu = fit_stack(&config.outcome_learners, &w, Some(a), y, config.folds, config.fold_seed)?;

    let h = 1.06 * variance(a).sqrt() * (n as f64).powf(-0.2);
    let (amin, amax) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| (l.min(v), u.max(v)));
    let mut positivity_violations = 0;
    let mut shift = Vec::with_capacity(n);
    for i in 0..n {
        let q = policy.apply(a[i]);
        if q != a[i] && (q < amin - h || q > amax + h) {
            positivity_violations += 1;
        }
        shift.push(if q == a[i] { 0.0 } else { mu.predict(w[i], q) - mu.predict(w[i], a[i]) });
    }
    let value = match policy {
        Policy::Identity => 0.0,
        Policy::Shift(_) => mean(&shift),
        Policy::Cap(_) => {
            let ybar = mean(y);
            if ybar == 0.0 {
                return Err(DrError::ZeroDenominator);
            }
            (ybar + mean(&shift)) / ybar
        }
    };
    Ok(PolicyEstimate {
        policy,
        value,
        positivity_violations,
        bandwidth: h,
    })
}
