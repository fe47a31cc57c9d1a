use crate::numkernel::{bessel_k, NumError, SymMatrix};

/// Matérn smoothness used throughout.
pub const MATERN_NU: u32 = 2;

/// `ρ(d) = (d/θ)² K₂(d/θ) / 2`, the ν = 2 Matérn correlation.
pub fn matern_corr(dist: f64, theta: f64) -> Result<f64, NumError> {
    matern_corr_with(dist, theta, false)
}

/// As [`matern_corr`]; `scaled_argument` replaces `d/θ` by `√(2ν)·d/θ`.
pub fn matern_corr_with(dist: f64, theta: f64, scaled_argument: bool) -> Result<f64, NumError> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(NumError::DomainError(format!("matern range must be positive, got {theta}")));
    }
    if !(dist >= 0.0) || !dist.is_finite() {
        return Err(NumError::DomainError(format!("distance must be finite and nonnegative, got {dist}")));
    }
    if dist == 0.0 {
        return Ok(1.0);
    }
    let scale = if scaled_argument { (2.0 * MATERN_NU as f64).sqrt() } else { 1.0 };
    let t = scale * dist / theta;
    // K₂ underflows near t ≈ 700; the correlation is zero to machine precision well before.
    if t > 700.0 {
        return Ok(0.0);
    }
    Ok((0.5 * t * t * bessel_k(MATERN_NU, t)?).min(1.0))
}

/// Correlation matrix `R(θ)` over `coords`. Entries with `keep(i, j) == false`
/// are set to zero.
pub fn matern_matrix(
    coords: &[[f64; 2]],
    theta: f64,
    scaled_argument: bool,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<SymMatrix, NumError> {
    let mut err = None;
    let m = SymMatrix::from_upper_fn(coords.len(), |i, j| {
        if i == j {
            return 1.0;
        }
        if !keep(i, j) {
            return 0.0;
        }
        let d = crate::spatialdata::euclidean(coords[i], coords[j]);
        match matern_corr_with(d, theta, scaled_argument) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(m),
    }
}
