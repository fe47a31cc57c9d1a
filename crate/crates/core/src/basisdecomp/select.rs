use std::ops::RangeInclusive;
use std::sync::Arc;

use super::{decompose, tps_basis, BasisError, EigenEnd};
use crate::numkernel::{dot, variance, EigenDecomposition};
use crate::spatialdata::SpatialDataset;

/// Dimension whose `Var(a_c) / Var(a)` lands closest to a target share.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionChoice {
    pub dim: usize,
    pub share: f64,
    /// Every `(dimension, share)` pair that was evaluated.
    pub shares: Vec<(usize, f64)>,
}

fn check_target(target: f64) -> Result<(), BasisError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(BasisError::TargetOutOfRange(target));
    }
    Ok(())
}

fn closest(shares: Vec<(usize, f64)>, target: f64) -> DimensionChoice {
    let (dim, share) = shares
        .iter()
        .copied()
        .fold((0, f64::NAN), |best, (m, s)| {
            if best.1.is_nan() || (s - target).abs() < (best.1 - target).abs() {
                (m, s)
            } else {
                best
            }
        });
    DimensionChoice { dim, share, shares }
}

/// Uses orthonormality of the eigenvectors: the share for every dimension in
/// `range` comes from running sums of `v_jᵀa` and `1ᵀv_j`.
pub fn eigen_dimension_for_target(
    e: &EigenDecomposition,
    a: &[f64],
    target: f64,
    which: EigenEnd,
    range: RangeInclusive<usize>,
) -> Result<DimensionChoice, BasisError> {
    check_target(target)?;
    let n = e.n();
    if a.len() != n {
        return Err(BasisError::DimensionMismatch {
            expected: n,
            found: a.len(),
        });
    }
    let (lo, hi) = (*range.start(), *range.end());
    if lo == 0 || hi > n || lo > hi {
        return Err(BasisError::MOutOfRange { m: if lo == 0 { 0 } else { hi }, n });
    }
    let va = variance(a);
    let mut sq = 0.0;
    let mut sum = 0.0;
    let mut shares = Vec::with_capacity(hi - lo + 1);
    for m in 1..=hi {
        let k = match which {
            EigenEnd::Smoothest => m - 1,
            EigenEnd::Roughest => n - m,
        };
        let v = e.eigenvector(k);
        let c = dot(&v, a);
        sq += c * c;
        sum += c * v.iter().sum::<f64>();
        if m >= lo {
            let var_c = (sq - sum * sum / n as f64) / (n - 1) as f64;
            shares.push((m, var_c / va));
        }
    }
    Ok(closest(shares, target))
}

/// Refits the thin-plate basis for each `df` in `range`.
pub fn tps_dimension_for_target(
    d: &SpatialDataset,
    a: &[f64],
    target: f64,
    range: RangeInclusive<usize>,
) -> Result<DimensionChoice, BasisError> {
    check_target(target)?;
    let va = variance(a);
    let mut shares = Vec::new();
    for df in range {
        let b = Arc::new(tps_basis(d, df)?);
        let dec = decompose(a, &b)?;
        shares.push((df, variance(&dec.a_c) / va));
    }
    if shares.is_empty() {
        return Err(BasisError::DfOutOfRange { df: 0, n: d.n() });
    }
    Ok(closest(shares, target))
}
