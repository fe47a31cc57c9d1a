#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DrError;
use crate::numkernel::variance;

/// Smallest Kish effective number of points under the kernel.
pub const MIN_KERNEL_MASS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthGrid {
    /// `count` log-spaced multiples of `sd(x)` from `lo` to `hi`.
    LogSpaced { count: usize, lo: f64, hi: f64 },
    Explicit(Vec<f64>),
}

impl Default for BandwidthGrid {
    fn default() -> Self {
        Self::LogSpaced {
            count: 20,
            lo: 0.05,
            hi: 2.0,
        }
    }
}

impl BandwidthGrid {
    /// Ascending bandwidths for exposures `x`.
    pub fn resolve(&self, x: &[f64]) -> Result<Vec<f64>, DrError> {
        let mut g = match self {
            Self::Explicit(v) => v.clone(),
            Self::LogSpaced { count, lo, hi } => {
                if *count == 0 || !(*lo > 0.0 && hi >= lo) {
                    return Err(DrError::InvalidConfig(format!("bad bandwidth grid ({count}, {lo}, {hi})")));
                }
                let sd = if x.len() > 1 { variance(x).sqrt() } else { 0.0 };
                let sd = if sd > 0.0 { sd } else { 1.0 };
                if *count == 1 {
                    vec![lo * sd]
                } else {
                    let (l0, l1) = (lo.ln(), hi.ln());
                    (0..*count)
                        .map(|k| sd * (l0 + (l1 - l0) * k as f64 / (*count - 1) as f64).exp())
                        .collect()
                }
            }
        };
        if g.is_empty() || g.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(DrError::InvalidConfig("bandwidths must be positive and finite".into()));
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        Ok(g)
    }
}

/// Equivalent-kernel weights of a Gaussian local-linear fit at `x0`, and the
/// Kish effective mass of the raw kernel weights. Falls back to local
/// constant weights when the local design is singular.
pub fn local_linear_weights(x: &[f64], x0: f64, h: f64) -> (Vec<f64>, f64) {
    let k: Vec<f64> = x.iter().map(|&xi| (-0.5 * ((xi - x0) / h).powi(2)).exp()).collect();
    let (mut s0, mut s1, mut s2, mut kk) = (0.0, 0.0, 0.0, 0.0);
    for (ki, xi) in k.iter().zip(x) {
        let d = xi - x0;
        s0 += ki;
        s1 += ki * d;
        s2 += ki * d * d;
        kk += ki * ki;
    }
    if !(s0 > 0.0) {
        return (vec![0.0; x.len()], 0.0);
    }
    let mass = s0 * s0 / kk;
    let det = s0 * s2 - s1 * s1;
    let w = if det > 1e-10 * s0 * s2 {
        k.iter().zip(x).map(|(ki, xi)| ki * (s2 - (xi - x0) * s1) / det).collect()
    } else {
        k.iter().map(|ki| ki / s0).collect()
    };
    (w, mass)
}

/// Mean squared leave-one-out residual, computed from the hat diagonal.
pub fn loo_cv_score(y: &[f64], x: &[f64], h: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let (w, _) = local_linear_weights(x, x[i], h);
        let fit: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
        let denom = 1.0 - w[i];
        if !(denom > 1e-8) {
            return f64::INFINITY;
        }
        let r = (y[i] - fit) / denom;
        s += r * r;
    }
    s / x.len() as f64
}

/// Picks the bandwidth with the smallest leave-one-out score among those
/// whose kernel mass is at least [`MIN_KERNEL_MASS`] at every `eval_points`.
/// Ties go to the smaller bandwidth. Returns `(bandwidth, score)`.
pub fn select_bandwidth(y: &[f64], x: &[f64], grid: &[f64], eval_points: &[f64]) -> Result<(f64, f64), DrError> {
    let admissible: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&h| eval_points.iter().all(|&e| local_linear_weights(x, e, h).1 >= MIN_KERNEL_MASS))
        .collect();
    if admissible.is_empty() {
        return Err(DrError::DegenerateWindow {
            largest: grid.iter().copied().fold(f64::NAN, f64::max),
        });
    }
    #[cfg(feature = "parallel")]
    let scores: Vec<f64> = admissible.par_iter().map(|&h| loo_cv_score(y, x, h)).collect();
    #[cfg(not(feature = "parallel"))]
    let scores: Vec<f64> = admissible.iter().map(|&h| loo_cv_score(y, x, h)).collect();
    let mut best = (admissible[0], scores[0]);
    for (&h, &s) in admissible.iter().zip(&scores).skip(1) {
        if s < best.1 {
            best = (h, s);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalLinearFit {
    pub value: f64,
    pub bandwidth: f64,
    /// Smoother weights at the evaluation point, summing to 1.
    pub weights: Vec<f64>,
    pub kernel_mass: f64,
    pub cv_score: f64,
}

/// Local-linear regression of `y` on `x` evaluated at `eval_at`, with the
/// bandwidth chosen from `grid` by leave-one-out cross-validation.
pub fn local_linear(y: &[f64], x: &[f64], grid: &BandwidthGrid, eval_at: f64) -> Result<LocalLinearFit, DrError> {
    if y.len() != x.len() {
        return Err(DrError::LengthMismatch {
            what: "pseudo-outcomes",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 5 {
        return Err(DrError::TooFewPoints { needed: 5, found: x.len() });
    }
    let g = grid.resolve(x)?;
    let (h, cv_score) = select_bandwidth(y, x, &g, &[eval_at])?;
    Ok(fit_at(y, x, h, eval_at, cv_score))
}

/// Local-linear fit at `eval_at` with a fixed bandwidth.
pub fn fit_at(y: &[f64], x: &[f64], h: f64, eval_at: f64, cv_score: f64) -> LocalLinearFit {
    let (weights, kernel_mass) = local_linear_weights(x, eval_at, h);
    let value = weights.iter().zip(y).map(|(a, b)| a * b).sum();
    LocalLinearFit {
        value,
        bandwidth: h,
        weights,
        kernel_mass,
        cv_score,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_lines() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.731).sin() * 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
        let fit = local_linear(&y, &x, &BandwidthGrid::default(), 0.3).unwrap();
        assert!((fit.value - (1.5 - 0.075)).abs() < 1e-10);
        let s: f64 = fit.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_exposures_give_mean() {
        let x = vec![2.0; 6];
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0];
        let fit = local_linear(&y, &x, &BandwidthGrid::default(), 2.0).unwrap();
        assert!((fit.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_and_far_away() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            local_linear(&x, &x, &BandwidthGrid::default(), 0.0),
            Err(DrError::TooFewPoints { .. })
        ));
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let grid = BandwidthGrid::Explicit(vec![0.01, 0.1]);
        assert!(matches!(local_linear(&x, &x, &grid, 4.5), Err(DrError::DegenerateWindow { .. })));
    }

    #[test]
    fn grid_is_log_spaced_in_sd_units() {
        let x = vec![0.0, 2.0];
        let g = BandwidthGrid::default().resolve(&x).unwrap();
        let sd = 2f64.sqrt();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05 * sd).abs() < 1e-12 && (g[19] - 2.0 * sd).abs() < 1e-12);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-9));
    }
}
