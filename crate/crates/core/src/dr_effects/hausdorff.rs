use super::DrError;

/// Closed interval `(lo, hi)`.
pub type Interval = (f64, f64);

fn check(i: Interval) -> Result<(), DrError> {
    if i.0 <= i.1 {
        Ok(())
    } else {
        Err(DrError::InvalidInterval { lo: i.0, hi: i.1 })
    }
}

/// Hausdorff distance between closed intervals, `max(|a₁ − a₂|, |b₁ − b₂|)`.
pub fn hausdorff(i1: Interval, i2: Interval) -> Result<f64, DrError> {
    check(i1)?;
    check(i2)?;
    Ok((i1.0 - i2.0).abs().max((i1.1 - i2.1).abs()))
}

/// Mean of [`hausdorff`] over pairs.
pub fn avg_hausdorff(pairs: &[(Interval, Interval)]) -> Result<f64, DrError> {
    if pairs.is_empty() {
        return Err(DrError::TooFewPoints { needed: 1, found: 0 });
    }
    let mut s = 0.0;
    for &(a, b) in pairs {
        s += hausdorff(a, b)?;
    }
    Ok(s / pairs.len() as f64)
}
