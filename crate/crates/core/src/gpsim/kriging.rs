use serde::{Deserialize, Serialize};

use super::{matern_matrix, SimError};
use crate::numkernel::{cholesky_jittered, mean, DEFAULT_JITTER_LADDER};

/// User-supplied covariance for a simple-kriging smoother.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrigingParams {
    pub theta: f64,
    /// Nugget variance relative to the unit partial sill.
    pub nugget: f64,
    #[serde(default)]
    pub scaled_argument: bool,
}

/// Splits `a` into a kriged smooth part and its remainder:
/// `a_c = ā + R (R + τ² I)⁻¹ (a − ā)`, `a_uc = a − a_c`.
///
/// Not a projection, so the exact orthogonality of basis decompositions does
/// not hold here.
pub fn kriging_split(coords: &[[f64; 2]], a: &[f64], p: &KrigingParams) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    if coords.len() != a.len() {
        return Err(SimError::InvalidScenario(format!(
            "{} coordinates for {} exposures",
            coords.len(),
            a.len()
        )));
    }
    if !(p.nugget > 0.0) {
        return Err(SimError::InvalidScenario("kriging nugget must be positive".into()));
    }
    let r = matern_matrix(coords, p.theta, p.scaled_argument, |_, _| true)?;
    let n = a.len();
    let mut k = r.matrix().clone();
    for i in 0..n {
        k[(i, i)] += p.nugget;
    }
    let k = crate::numkernel::SymMatrix::new(k)?;
    let l = cholesky_jittered(&k, &DEFAULT_JITTER_LADDER)?.lower;
    let abar = mean(a);
    // Forward then backward substitution for (R + τ²I) w = a − ā.
    let mut w: Vec<f64> = a.iter().map(|v| v - abar).collect();
    for i in 0..n {
        let s: f64 = (0..i).map(|j| l[(i, j)] * w[j]).sum();
        w[i] = (w[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| l[(j, i)] * w[j]).sum();
        w[i] = (w[i] - s) / l[(i, i)];
    }
    let smooth = r.matrix().matvec(&w)?;
    let a_c: Vec<f64> = smooth.iter().map(|s| abar + s).collect();
    let a_uc = a.iter().zip(&a_c).map(|(x, c)| x - c).collect();
    Ok((a_c, a_uc))
}
