use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::learners::{fit_stack, fold_assignment, Features, Learner, StackedRegressor};
use super::DrError;
use crate::spatialdata::SpatialDataset;

/// Variables adjusted for besides the dataset's covariates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustmentSet {
    /// Nothing, not even the dataset covariates.
    None,
    SpatialCoords,
    #[serde(rename = "a_c")]
    AC,
    #[serde(rename = "a_c+spatial_coords")]
    ACSpatialCoords,
}

impl AdjustmentSet {
    pub fn needs_a_c(self) -> bool {
        matches!(self, Self::AC | Self::ACSpatialCoords)
    }

    pub fn uses_coords(self) -> bool {
        matches!(self, Self::SpatialCoords | Self::ACSpatialCoords)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceConfig {
    pub folds: usize,
    pub fold_seed: u64,
    pub outcome_learners: Vec<Learner>,
    pub density_learners: Vec<Learner>,
    /// Multiplies the fitted residual variance of the exposure model.
    pub density_variance_multiplier: f64,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            fold_seed: 0,
            outcome_learners: Learner::OUTCOME_STACK.to_vec(),
            density_learners: Learner::DENSITY_STACK.to_vec(),
            density_variance_multiplier: 1.0,
        }
    }
}

/// Builds the standardized adjustment features for every unit.
pub fn adjustment_features(d: &SpatialDataset, adjust: AdjustmentSet, a_c: Option<&[f64]>) -> Result<Features, DrError> {
    let n = d.n();
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    if adjust != AdjustmentSet::None {
        for (j, name) in d.covariate_names().iter().enumerate() {
            cols.push((name.clone(), d.covariates().column(j)));
        }
    }
    if adjust.needs_a_c() {
        let a_c = a_c.ok_or(DrError::MissingDecomposition)?;
        if a_c.len() != n {
            return Err(DrError::LengthMismatch {
                what: "a_c",
                expected: n,
                found: a_c.len(),
            });
        }
        cols.push(("a_c".into(), a_c.to_vec()));
    }
    if adjust.uses_coords() {
        cols.push(("coord_x".into(), d.coords().iter().map(|c| c[0]).collect()));
        cols.push(("coord_y".into(), d.coords().iter().map(|c| c[1]).collect()));
    }
    Features::standardized(cols, n)
}

/// `Normal(m̂(w), σ̂²)`, optionally conditioned on `a ≥ lower`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDensity {
    pub mean_model: StackedRegressor,
    pub sigma: f64,
    pub truncate_below: Option<f64>,
}

impl GaussianDensity {
    pub fn mean(&self, w: &[f64]) -> f64 {
        self.mean_model.predict(w, 0.0)
    }

    /// `P(A ≥ lower | w)` under the untruncated model, or 1.
    pub fn tail_mass(&self, m: f64) -> f64 {
        match self.truncate_below {
            Some(c) => (0.5 * erfc((c - m) / (self.sigma * std::f64::consts::SQRT_2))).max(1e-300),
            None => 1.0,
        }
    }

    /// Density at `a` given a precomputed mean and tail mass.
    #[inline]
    pub fn pdf_with(&self, a: f64, m: f64, tail: f64) -> f64 {
        if let Some(c) = self.truncate_below {
            if a < c {
                return 0.0;
            }
        }
        let z = (a - m) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt()) / tail
    }

    pub fn pdf(&self, a: f64, w: &[f64]) -> f64 {
        let m = self.mean(w);
        self.pdf_with(a, m, self.tail_mass(m))
    }
}

/// Fitted outcome regression and exposure density.
#[derive(Clone, Debug)]
pub struct NuisanceFit {
    pub adjust: AdjustmentSet,
    /// Features of the units the outcome model was fitted on.
    pub features: Features,
    /// Dataset row of each feature row.
    pub units: Vec<usize>,
    pub outcome_model: StackedRegressor,
    pub density_model: GaussianDensity,
    pub learner_weights: Vec<f64>,
    pub folds: Vec<usize>,
}

fn fit_density(
    features: &Features,
    a: &[f64],
    config: &NuisanceConfig,
    truncate_below: Option<f64>,
) -> Result<GaussianDensity, DrError> {
    let w: Vec<&[f64]> = features.rows.iter().map(|r| r.as_slice()).collect();
    let mean_model = fit_stack(&config.density_learners, &w, None, a, config.folds, config.fold_seed)?;
    let n = a.len() as f64;
    let rss: f64 = w.iter().zip(a).map(|(r, ai)| (ai - mean_model.predict(r, 0.0)).powi(2)).sum();
    let var = (rss / n).max(f64::MIN_POSITIVE);
    if !(config.density_variance_multiplier > 0.0) {
        return Err(DrError::InvalidConfig("density_variance_multiplier must be positive".into()));
    }
    Ok(GaussianDensity {
        mean_model,
        sigma: (var * config.density_variance_multiplier).sqrt(),
        truncate_below,
    })
}

fn check_outcome(d: &SpatialDataset) -> Result<&[f64], DrError> {
    let y = d.outcome().ok_or(DrError::MissingOutcome)?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(DrError::SingularDesign("outcome has non-finite values".into()));
    }
    Ok(y)
}

/// Both nuisance models fitted on every unit.
pub fn fit_nuisances(
    d: &SpatialDataset,
    adjust: AdjustmentSet,
    a_c: Option<&[f64]>,
    config: &NuisanceConfig,
) -> Result<NuisanceFit, DrError> {
    let units: Vec<usize> = (0..d.n()).collect();
    fit_on(d, adjust, a_c, config, units, None)
}

/// Nuisances for the subpopulation `A ≥ c`.
///
/// The exposure model is fitted on all units and then conditioned on
/// `A ≥ c`, which keeps a correctly specified Gaussian correct within the
/// subpopulation. The outcome model is fitted on the subpopulation only.
pub fn fit_truncated_nuisances(
    d: &SpatialDataset,
    adjust: AdjustmentSet,
    a_c: Option<&[f64]>,
    c: f64,
    config: &NuisanceConfig,
) -> Result<NuisanceFit, DrError> {
    let units: Vec<usize> = (0..d.n()).filter(|&i| d.exposure()[i] >= c).collect();
    if units.is_empty() {
        return Err(DrError::EmptySubpopulation { c });
    }
    fit_on(d, adjust, a_c, config, units, Some(c))
}

fn fit_on(
    d: &SpatialDataset,
    adjust: AdjustmentSet,
    a_c: Option<&[f64]>,
    config: &NuisanceConfig,
    units: Vec<usize>,
    c: Option<f64>,
) -> Result<NuisanceFit, DrError> {
    let y = check_outcome(d)?;
    let all = adjustment_features(d, adjust, a_c)?;
    let density_model = fit_density(&all, d.exposure(), config, c)?;
    let features = all.subset(&units);
    let w: Vec<&[f64]> = features.rows.iter().map(|r| r.as_slice()).collect();
    let a: Vec<f64> = units.iter().map(|&i| d.exposure()[i]).collect();
    let ys: Vec<f64> = units.iter().map(|&i| y[i]).collect();
    let outcome_model = fit_stack(&config.outcome_learners, &w, Some(&a), &ys, config.folds, config.fold_seed)?;
    Ok(NuisanceFit {
        adjust,
        learner_weights: outcome_model.weights.clone(),
        folds: fold_assignment(units.len(), config.folds, config.fold_seed)?,
        features,
        units,
        outcome_model,
        density_model,
    })
}
