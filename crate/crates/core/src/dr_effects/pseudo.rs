#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::nuisance::NuisanceFit;
use super::DrError;
use crate::spatialdata::SpatialDataset;

/// The pieces of the doubly robust mapping for each unit of a subpopulation.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoParts {
    /// Dataset rows in the subpopulation.
    pub units: Vec<usize>,
    pub exposure: Vec<f64>,
    /// `Y − μ̂(w, a)`.
    pub residual: Vec<f64>,
    /// `π̂(a | w)` at the unit's own covariates.
    pub own_density: Vec<f64>,
    /// `mean_j π̂(a | w_j)` over the subpopulation.
    pub marginal_density: Vec<f64>,
    /// `mean_j μ̂(w_j, a)` over the subpopulation.
    pub marginal_mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoOutcome {
    pub units: Vec<usize>,
    pub exposure: Vec<f64>,
    pub xi: Vec<f64>,
    pub clamped_count: usize,
    pub c: f64,
    pub min_density: f64,
}

impl PseudoParts {
    /// `ξ = residual / own · marginal_density + marginal_mean`, clamped to
    /// `range`.
    pub fn assemble(&self, range: (f64, f64), c: f64) -> PseudoOutcome {
        let (lo, hi) = range;
        let mut clamped_count = 0;
        let xi = (0..self.units.len())
            .map(|i| {
                let r = self.residual[i];
                let w = if r == 0.0 { 0.0 } else { r * (self.marginal_density[i] / self.own_density[i]) };
                let raw = w + self.marginal_mean[i];
                if raw < lo || raw > hi || raw.is_nan() {
                    clamped_count += 1;
                    if raw > hi {
                        hi
                    } else {
                        lo
                    }
                } else {
                    raw
                }
            })
            .collect();
        PseudoOutcome {
            units: self.units.clone(),
            exposure: self.exposure.clone(),
            xi,
            clamped_count,
            c,
            min_density: self.own_density.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Components of the mapping on the units `nf` was fitted on.
pub fn pseudo_parts(d: &SpatialDataset, nf: &NuisanceFit) -> Result<PseudoParts, DrError> {
    let y = d.outcome().ok_or(DrError::MissingOutcome)?;
    let units = nf.units.clone();
    let np = units.len();
    if np == 0 {
        return Err(DrError::EmptySubpopulation { c: nf.density_model.truncate_below.unwrap_or(f64::NAN) });
    }
    let exposure: Vec<f64> = units.iter().map(|&i| d.exposure()[i]).collect();
    let rows = &nf.features.rows;
    let mu = &nf.outcome_model;
    let g = &nf.density_model;

    let polys: Vec<[f64; 3]> = rows.iter().map(|w| mu.poly_in_a(w)).collect();
    let mut avg = [0.0; 3];
    for p in &polys {
        for k in 0..3 {
            avg[k] += p[k];
        }
    }
    for v in &mut avg {
        *v /= np as f64;
    }
    let means: Vec<f64> = rows.iter().map(|w| g.mean(w)).collect();
    let tails: Vec<f64> = means.iter().map(|&m| g.tail_mass(m)).collect();

    let residual: Vec<f64> = (0..np)
        .map(|i| {
            let p = polys[i];
            let a = exposure[i];
            y[units[i]] - (p[0] + p[1] * a + p[2] * a * a)
        })
        .collect();
    let own_density: Vec<f64> = (0..np).map(|i| g.pdf_with(exposure[i], means[i], tails[i])).collect();
    let marginal_mean: Vec<f64> = exposure.iter().map(|&a| avg[0] + avg[1] * a + avg[2] * a * a).collect();

    let marginal = |i: usize| -> f64 {
        let a = exposure[i];
        let mut s = 0.0;
        for j in 0..np {
            s += g.pdf_with(a, means[j], tails[j]);
        }
        s / np as f64
    };
    #[cfg(feature = "parallel")]
    let marginal_density: Vec<f64> = (0..np).into_par_iter().map(marginal).collect();
    #[cfg(not(feature = "parallel"))]
    let marginal_density: Vec<f64> = (0..np).map(marginal).collect();

    Ok(PseudoParts {
        units,
        exposure,
        residual,
        own_density,
        marginal_density,
        marginal_mean,
    })
}

/// Doubly robust pseudo-outcome on the units of `nf`, clamped to the range of
/// all observed outcomes.
pub fn pseudo_outcome(d: &SpatialDataset, nf: &NuisanceFit, c: f64) -> Result<PseudoOutcome, DrError> {
    let y = d.outcome().ok_or(DrError::MissingOutcome)?;
    let range = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(pseudo_parts(d, nf)?.assemble(range, c))
}
