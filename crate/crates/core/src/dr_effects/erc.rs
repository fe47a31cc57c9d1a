use serde::{Deserialize, Serialize};

use super::nuisance::{fit_nuisances, AdjustmentSet, NuisanceConfig};
use super::pseudo::pseudo_outcome;
use super::smoother::{fit_at, select_bandwidth, BandwidthGrid};
use super::{DrError, Z_95};
use crate::spatialdata::SpatialDataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `count` equally spaced points between two exposure percentiles.
    Percentiles { count: usize, lower: f64, upper: f64 },
    Points(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::Percentiles {
            count: 100,
            lower: 2.5,
            upper: 97.5,
        }
    }
}

/// Linear-interpolation percentile, `p` in `[0, 100]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl GridSpec {
    pub fn resolve(&self, a: &[f64]) -> Result<Vec<f64>, DrError> {
        match self {
            Self::Points(p) => {
                if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
                    return Err(DrError::InvalidConfig("grid points must be finite and non-empty".into()));
                }
                Ok(p.clone())
            }
            Self::Percentiles { count, lower, upper } => {
                if *count == 0 || !(0.0..=100.0).contains(lower) || !(0.0..=100.0).contains(upper) || lower > upper {
                    return Err(DrError::InvalidConfig(format!("bad percentile grid ({count}, {lower}, {upper})")));
                }
                let mut s = a.to_vec();
                s.sort_by(f64::total_cmp);
                let (lo, hi) = (percentile(&s, *lower), percentile(&s, *upper));
                if *count == 1 {
                    return Ok(vec![lo]);
                }
                Ok((0..*count)
                    .map(|k| lo + (hi - lo) * k as f64 / (*count - 1) as f64)
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErcConfig {
    pub nuisance: NuisanceConfig,
    pub bandwidths: BandwidthGrid,
    pub grid: GridSpec,
    pub z: f64,
}

impl Default for ErcConfig {
    fn default() -> Self {
        Self {
            nuisance: NuisanceConfig::default(),
            bandwidths: BandwidthGrid::default(),
            grid: GridSpec::default(),
            z: Z_95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErcPoint {
    pub a: f64,
    pub value: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bandwidth: f64,
}

/// Exposure-response curve `E[Y(a)]` on a grid, from the pseudo-outcome on
/// the full sample and one cross-validated bandwidth shared by all points.
pub fn erc_grid(
    d: &SpatialDataset,
    adjust: AdjustmentSet,
    a_c: Option<&[f64]>,
    config: &ErcConfig,
) -> Result<Vec<ErcPoint>, DrError> {
    if d.n() < 5 {
        return Err(DrError::TooFewPoints { needed: 5, found: d.n() });
    }
    let grid = config.grid.resolve(d.exposure())?;
    let nf = fit_nuisances(d, adjust, a_c, &config.nuisance)?;
    let xi = pseudo_outcome(d, &nf, f64::NEG_INFINITY)?;
    let bw = config.bandwidths.resolve(&xi.exposure)?;
    let (h, cv) = select_bandwidth(&xi.xi, &xi.exposure, &bw, &grid)?;
    let n = xi.xi.len() as f64;
    Ok(grid
        .iter()
        .map(|&a| {
            let f = fit_at(&xi.xi, &xi.exposure, h, a, cv);
            let phi: Vec<f64> = f.weights.iter().zip(&xi.xi).map(|(w, x)| n * w * (x - f.value)).collect();
            let se = (crate::numkernel::variance(&phi) / n).sqrt();
            ErcPoint {
                a,
                value: f.value,
                se,
                ci_lo: f.value - config.z * se,
                ci_hi: f.value + config.z * se,
                bandwidth: h,
            }
        })
        .collect())
}
