//! Doubly robust estimation of truncated exposure effects, exposure-response
//! curves and policy contrasts.

mod erc;
mod hausdorff;
mod learners;
mod nuisance;
mod policy;
mod pseudo;
mod smoother;
mod suite;

pub use erc::{erc_grid, ErcConfig, ErcPoint, GridSpec};
pub use hausdorff::{avg_hausdorff, hausdorff, Interval};
pub use learners::{fit_stack, fold_assignment, simplex_least_squares, Features, FittedLearner, Learner, StackedRegressor};
pub use nuisance::{
    adjustment_features, fit_nuisances, fit_truncated_nuisances, AdjustmentSet, GaussianDensity, NuisanceConfig,
    NuisanceFit,
};
pub use policy::{policy_effect, Policy, PolicyEstimate};
pub use pseudo::{pseudo_outcome, pseudo_parts, PseudoOutcome, PseudoParts};
pub use smoother::{
    fit_at, local_linear, local_linear_weights, loo_cv_score, select_bandwidth, BandwidthGrid, LocalLinearFit,
    MIN_KERNEL_MASS,
};
pub use suite::{BenchmarkMethod, MethodSuite, SuiteConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{covariance, mean, NumError};
use crate::spatialdata::SpatialDataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrError {
    #[error("dataset has no outcome column")]
    MissingOutcome,

    #[error("adjustment set needs a_c but no decomposition was given")]
    MissingDecomposition,

    #[error("no units with exposure >= {c}")]
    EmptySubpopulation { c: f64 },

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("kernel mass below 3 points for every bandwidth up to {largest}")]
    DegenerateWindow { largest: f64 },

    #[error("mean outcome is zero; the ratio is undefined")]
    ZeroDenominator,

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("{k} folds for {n} units")]
    KTooLarge { k: usize, n: usize },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncatedEffectConfig {
    pub nuisance: NuisanceConfig,
    pub bandwidths: BandwidthGrid,
    pub z: f64,
}

impl Default for TruncatedEffectConfig {
    fn default() -> Self {
        Self {
            nuisance: NuisanceConfig::default(),
            bandwidths: BandwidthGrid::default(),
            z: Z_95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedEffectEstimate {
    pub psi: f64,
    pub theta: [f64; 4],
    pub ci: (f64, f64),
    pub se: f64,
    pub bandwidth: f64,
    pub clamped_count: usize,
    pub min_density: f64,
    pub n: usize,
    pub n_above: usize,
    pub learner_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMethod {
    pub psi: f64,
    pub gradient: [f64; 4],
    pub se: f64,
    pub ci: (f64, f64),
}

/// `(θ₁(1 − θ₂) + θ₃θ₂) / θ₄`.
pub fn psi_from_theta(theta: [f64; 4]) -> f64 {
    let [t1, t2, t3, t4] = theta;
    (t1 * (1.0 - t2) + t3 * t2) / t4
}

/// Gradient of [`psi_from_theta`].
pub fn psi_gradient(theta: [f64; 4]) -> Result<[f64; 4], DrError> {
    let [t1, t2, t3, t4] = theta;
    if t4 == 0.0 {
        return Err(DrError::ZeroDenominator);
    }
    Ok([(1.0 - t2) / t4, (t3 - t1) / t4, t2 / t4, -psi_from_theta(theta) / t4])
}

/// Delta-method interval from per-unit influence values. `n` is the sample
/// size dividing the variance; `z` the normal quantile.
pub fn delta_method(phi: &[Vec<f64>; 4], theta: [f64; 4], n: usize, z: f64) -> Result<DeltaMethod, DrError> {
    let len = phi[0].len();
    for p in phi {
        if p.len() != len {
            return Err(DrError::LengthMismatch {
                what: "influence vector",
                expected: len,
                found: p.len(),
            });
        }
    }
    let g = psi_gradient(theta)?;
    let psi = psi_from_theta(theta);
    let mut q = 0.0;
    for r in 0..4 {
        for s in 0..4 {
            q += g[r] * g[s] * covariance(&phi[r], &phi[s]);
        }
    }
    let se = (q.max(0.0) / n as f64).sqrt();
    Ok(DeltaMethod {
        psi,
        gradient: g,
        se,
        ci: (psi - z * se, psi + z * se),
    })
}

/// `(θ₂, θ₃, θ₄)`: share below `c`, mean outcome below `c` (0 if none), and
/// mean outcome.
pub fn plug_in_thetas(a: &[f64], y: &[f64], c: f64) -> (f64, f64, f64) {
    let below: Vec<f64> = a.iter().zip(y).filter(|(ai, _)| **ai < c).map(|(_, yi)| *yi).collect();
    let t2 = below.len() as f64 / a.len() as f64;
    let t3 = if below.is_empty() { 0.0 } else { mean(&below) };
    (t2, t3, mean(y))
}

/// Per-unit influence values `[φ₁, φ₂, φ₃, φ₄]`.
///
/// `φ₁` is the first-order fluctuation of the linear smoother `ν̂(c)`,
/// `n · w_i(c) · (ξ_i − ν̂(c))` on the smoothed units. `φ₃` is centered
/// within `A < c`.
pub fn influence_functions(
    d: &SpatialDataset,
    xi: &PseudoOutcome,
    nu_hat: f64,
    smoother_weights: &[f64],
    c: f64,
) -> Result<[Vec<f64>; 4], DrError> {
    let y = d.outcome().ok_or(DrError::MissingOutcome)?;
    let a = d.exposure();
    let n = d.n();
    if smoother_weights.len() != xi.xi.len() {
        return Err(DrError::LengthMismatch {
            what: "smoother weights",
            expected: xi.xi.len(),
            found: smoother_weights.len(),
        });
    }
    let (t2, t3, t4) = plug_in_thetas(a, y, c);
    let mut phi1 = vec![0.0; n];
    for (k, &i) in xi.units.iter().enumerate() {
        phi1[i] = n as f64 * smoother_weights[k] * (xi.xi[k] - nu_hat);
    }
    let below = |i: usize| a[i] < c;
    let phi2 = (0..n).map(|i| if below(i) { 1.0 - t2 } else { -t2 }).collect();
    let phi3 = (0..n).map(|i| if below(i) { y[i] - t3 } else { 0.0 }).collect();
    let phi4 = y.iter().map(|v| v - t4).collect();
    Ok([phi1, phi2, phi3, phi4])
}

/// Doubly robust estimate of `E[Y(min(A, c))] / E[Y]`.
///
/// `a_c` is the confounded exposure component, required when `adjust`
/// includes it.
pub fn truncated_effect(
    d: &SpatialDataset,
    adjust: AdjustmentSet,
    a_c: Option<&[f64]>,
    c: f64,
    config: &TruncatedEffectConfig,
) -> Result<TruncatedEffectEstimate, DrError> {
    let y = d.outcome().ok_or(DrError::MissingOutcome)?;
    let a = d.exposure();
    let n = d.n();
    let (t2, t3, t4) = plug_in_thetas(a, y, c);
    if t4 == 0.0 {
        return Err(DrError::ZeroDenominator);
    }
    let n_above = a.iter().filter(|&&v| v >= c).count();
    if n_above == 0 {
        return Ok(TruncatedEffectEstimate {
            psi: 1.0,
            theta: [0.0, 1.0, t3, t4],
            ci: (1.0, 1.0),
            se: 0.0,
            bandwidth: 0.0,
            clamped_count: 0,
            min_density: f64::NAN,
            n,
            n_above,
            learner_weights: vec![],
        });
    }
    if n_above < 5 {
        return Err(DrError::TooFewPoints {
            needed: 5,
            found: n_above,
        });
    }
    let nf = fit_truncated_nuisances(d, adjust, a_c, c, &config.nuisance)?;
    let xi = pseudo_outcome(d, &nf, c)?;
    let ll = local_linear(&xi.xi, &xi.exposure, &config.bandwidths, c)?;
    let theta = [ll.value, t2, t3, t4];
    let phi = influence_functions(d, &xi, ll.value, &ll.weights, c)?;
    let dm = delta_method(&phi, theta, n, config.z)?;
    Ok(TruncatedEffectEstimate {
        psi: dm.psi,
        theta,
        ci: dm.ci,
        se: dm.se,
        bandwidth: ll.bandwidth,
        clamped_count: xi.clamped_count,
        min_density: xi.min_density,
        n,
        n_above,
        learner_weights: nf.learner_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_at_unit_theta() {
        let g = psi_gradient([1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(g, [1.0, -1.0, 0.0, -1.0]);
        assert_eq!(psi_gradient([1.0, 0.0, 0.0, 0.0]), Err(DrError::ZeroDenominator));
    }

    #[test]
    fn zero_influence_gives_degenerate_interval() {
        let phi = [vec![0.0; 5], vec![0.0; 5], vec![0.0; 5], vec![0.0; 5]];
        let dm = delta_method(&phi, [1.2, 0.3, 0.5, 2.0], 5, Z_95).unwrap();
        assert_eq!(dm.se, 0.0);
        assert_eq!(dm.ci, (dm.psi, dm.psi));
    }

    #[test]
    fn vacuous_truncation() {
        let coords: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 0.0]).collect();
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = a.iter().map(|v| 1.0 + v).collect();
        let d = SpatialDataset::new(coords, a).unwrap().with_outcome(y).unwrap();
        let e = truncated_effect(&d, AdjustmentSet::None, None, 100.0, &TruncatedEffectConfig::default()).unwrap();
        assert_eq!(e.psi, 1.0);
        assert_eq!(e.ci, (1.0, 1.0));
        assert!(matches!(
            truncated_effect(&d, AdjustmentSet::None, None, 7.5, &TruncatedEffectConfig::default()),
            Err(DrError::TooFewPoints { .. })
        ));
    }
}
