//! Linear instrumental-variable estimators built on an exposure split.
//!
//! All three strategies target `Cov(Y, A_UC) / Var(A_UC)` and coincide
//! exactly in finite samples when the basis spans the constant.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basisdecomp::{decompose, BasisError, ExposureDecomposition, SpatialBasis};
use crate::numkernel::{covariance, least_squares, mean, variance, Matrix, NumError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvError {
    #[error("instrument has zero variance")]
    ZeroInstrumentVariance,

    #[error("double prediction needs a basis that spans the constant")]
    BasisWithoutConstant,

    #[error("outcome has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Basis(#[from] BasisError),

    #[error(transparent)]
    Numeric(#[from] NumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IvStrategy {
    #[serde(rename = "2sls")]
    TwoSls,
    #[serde(rename = "2sri")]
    TwoSri,
    #[serde(rename = "doublepred")]
    DoublePrediction,
}

impl IvStrategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::TwoSls => "2sls",
            Self::TwoSri => "2sri",
            Self::DoublePrediction => "doublepred",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IvFit {
    pub beta: f64,
    pub intercept: f64,
    pub strategy: IvStrategy,
    /// `Var(a_uc) / Var(a)`.
    pub instrument_variance_share: f64,
}

fn check(y: &[f64], dec: &ExposureDecomposition) -> Result<(), IvError> {
    if y.len() != dec.a_uc.len() {
        return Err(IvError::DimensionMismatch {
            expected: dec.a_uc.len(),
            found: y.len(),
        });
    }
    if dec.zero_instrument || !(variance(&dec.a_uc) > 0.0) {
        return Err(IvError::ZeroInstrumentVariance);
    }
    Ok(())
}

fn share(dec: &ExposureDecomposition) -> f64 {
    dec.instrument_share().clamp(0.0, 1.0)
}

/// Outcome regressed on the instrument alone.
pub fn fit_2sls(y: &[f64], dec: &ExposureDecomposition) -> Result<IvFit, IvError> {
    check(y, dec)?;
    let beta = covariance(y, &dec.a_uc) / variance(&dec.a_uc);
    Ok(IvFit {
        beta,
        intercept: mean(y) - beta * mean(&dec.a_uc),
        strategy: IvStrategy::TwoSls,
        instrument_variance_share: share(dec),
    })
}

/// Outcome regressed on `[1, a_uc, a_c]`; `beta` is the `a_uc` coefficient.
pub fn fit_2sri(y: &[f64], dec: &ExposureDecomposition) -> Result<IvFit, IvError> {
    check(y, dec)?;
    let n = y.len();
    let design = Matrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => dec.a_uc[i],
        _ => dec.a_c[i],
    });
    let fit = least_squares(&design, y)?;
    Ok(IvFit {
        beta: fit.coefficients[1],
        intercept: fit.coefficients[0],
        strategy: IvStrategy::TwoSri,
        instrument_variance_share: share(dec),
    })
}

/// Residualizes both outcome and exposure on the basis, then regresses one
/// residual on the other.
pub fn fit_double_prediction(y: &[f64], a: &[f64], b: &Arc<SpatialBasis>) -> Result<IvFit, IvError> {
    if !b.includes_constant() {
        return Err(IvError::BasisWithoutConstant);
    }
    let dec = decompose(a, b)?;
    check(y, &dec)?;
    let y_c = b.project(y)?;
    let y_uc: Vec<f64> = y.iter().zip(&y_c).map(|(v, c)| v - c).collect();
    let beta = covariance(&y_uc, &dec.a_uc) / variance(&dec.a_uc);
    Ok(IvFit {
        beta,
        intercept: mean(&y_uc) - beta * mean(&dec.a_uc),
        strategy: IvStrategy::DoublePrediction,
        instrument_variance_share: share(&dec),
    })
}

/// Dispatches on `strategy`, decomposing `a` when needed.
pub fn fit(strategy: IvStrategy, y: &[f64], a: &[f64], b: &Arc<SpatialBasis>) -> Result<IvFit, IvError> {
    match strategy {
        IvStrategy::TwoSls => fit_2sls(y, &decompose(a, b)?),
        IvStrategy::TwoSri => fit_2sri(y, &decompose(a, b)?),
        IvStrategy::DoublePrediction => fit_double_prediction(y, a, b),
    }
}
