//! Spatial bases and the projection split `A = A_C + A_UC`.

mod select;

pub use select::{eigen_dimension_for_target, tps_dimension_for_target, DimensionChoice};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{
    norm2, sym_eigen, variance, EigenDecomposition, Matrix, NumError, PivotedQr, SymMatrix,
};
use crate::spatialdata::{euclidean, SpatialDataset};

/// Residual bound for deciding that the constant vector lies in a span.
pub const CONSTANT_SPAN_TOL: f64 = 1e-8;
/// `Var(a_uc) / Var(a)` below this flags a useless instrument.
pub const ZERO_INSTRUMENT_RATIO: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("degrees of freedom {df} outside [4, {n}]")]
    DfOutOfRange { df: usize, n: usize },

    #[error("all coordinates coincide")]
    DegenerateCoordinates,

    #[error("basis dimension {m} outside [1, {n}]")]
    MOutOfRange { m: usize, n: usize },

    #[error("dataset has no region labels")]
    NoRegionLabels,

    #[error("basis column {0} is zero or non-finite")]
    BadColumn(usize),

    #[error("length mismatch: basis has {expected} rows, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variance target {0} must lie in (0, 1)")]
    TargetOutOfRange(f64),

    #[error(transparent)]
    Numeric(#[from] NumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    ThinPlateSpline,
    LaplacianEigen,
    PrecisionEigen,
    RegionIndicator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenEnd {
    Smoothest,
    Roughest,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasisMeta {
    Knots(Vec<[f64; 2]>),
    Eigenvalues(Vec<f64>),
    Levels(Vec<String>),
    None,
}

/// An `n × m` basis with its least-squares factorization precomputed.
#[derive(Clone, Debug)]
pub struct SpatialBasis {
    kind: BasisKind,
    matrix: Matrix,
    meta: BasisMeta,
    includes_constant: bool,
    qr: PivotedQr,
}

impl SpatialBasis {
    /// Wraps an arbitrary basis matrix. Every column must be finite and
    /// non-zero.
    pub fn from_matrix(kind: BasisKind, matrix: Matrix, meta: BasisMeta) -> Result<Self, BasisError> {
        if matrix.cols() == 0 {
            return Err(BasisError::MOutOfRange {
                m: 0,
                n: matrix.rows(),
            });
        }
        for j in 0..matrix.cols() {
            let c = norm2(&matrix.column(j));
            if !(c.is_finite() && c > 0.0) {
                return Err(BasisError::BadColumn(j));
            }
        }
        let qr = PivotedQr::new(&matrix)?;
        let ones = vec![1.0; matrix.rows()];
        let fit = qr.solve(&ones)?;
        let includes_constant = fit.residuals.iter().all(|r| r.abs() < CONSTANT_SPAN_TOL);
        Ok(Self {
            kind,
            matrix,
            meta,
            includes_constant,
            qr,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn meta(&self) -> &BasisMeta {
        &self.meta
    }

    pub fn includes_constant(&self) -> bool {
        self.includes_constant
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rank(&self) -> usize {
        self.qr.rank()
    }

    /// Orthogonal projection onto the column span.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, BasisError> {
        if v.len() != self.n() {
            return Err(BasisError::DimensionMismatch {
                expected: self.n(),
                found: v.len(),
            });
        }
        Ok(self.qr.project(v)?)
    }
}

/// `a = a_c + a_uc` with `a_c` the projection of `a` onto the basis.
#[derive(Clone, Debug)]
pub struct ExposureDecomposition {
    pub a_c: Vec<f64>,
    pub a_uc: Vec<f64>,
    pub basis: Arc<SpatialBasis>,
    pub projection_rank: usize,
    /// Set when `Var(a_uc) / Var(a)` is numerically zero.
    pub zero_instrument: bool,
}

impl ExposureDecomposition {
    /// `Var(a_c) / (Var(a_c) + Var(a_uc))`.
    pub fn confounded_share(&self) -> f64 {
        let (vc, vu) = (variance(&self.a_c), variance(&self.a_uc));
        vc / (vc + vu)
    }

    /// `Var(a_uc) / Var(a)`.
    pub fn instrument_share(&self) -> f64 {
        let a: Vec<f64> = self.a_c.iter().zip(&self.a_uc).map(|(c, u)| c + u).collect();
        variance(&self.a_uc) / variance(&a)
    }
}

pub fn decompose(a: &[f64], b: &Arc<SpatialBasis>) -> Result<ExposureDecomposition, BasisError> {
    let a_c = b.project(a)?;
    let a_uc: Vec<f64> = a.iter().zip(&a_c).map(|(x, c)| x - c).collect();
    let va = variance(a);
    let vu = variance(&a_uc);
    let zero_instrument = !(vu > ZERO_INSTRUMENT_RATIO * va) || va == 0.0;
    Ok(ExposureDecomposition {
        a_c,
        a_uc,
        basis: Arc::clone(b),
        projection_rank: b.rank(),
        zero_instrument,
    })
}

/// `φ(r) = r² log r` with `φ(0) = 0`.
#[inline]
pub fn tps_radial(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

/// Deterministic maximin subsample: start from the point nearest the
/// centroid, then repeatedly take the point farthest from all chosen knots.
/// Ties go to the lowest index.
pub fn farthest_point_knots(coords: &[[f64; 2]], count: usize) -> Vec<usize> {
    let n = coords.len();
    if n == 0 || count == 0 {
        return Vec::new();
    }
    let (sx, sy) = coords.iter().fold((0.0, 0.0), |(x, y), c| (x + c[0], y + c[1]));
    let centroid = [sx / n as f64, sy / n as f64];
    let first = argmin(coords.iter().map(|&c| euclidean(c, centroid)));
    let mut chosen = vec![first];
    let mut mind: Vec<f64> = coords.iter().map(|&c| euclidean(c, coords[first])).collect();
    while chosen.len() < count.min(n) {
        let next = argmax(mind.iter().copied());
        chosen.push(next);
        for (m, &c) in mind.iter_mut().zip(coords) {
            *m = m.min(euclidean(c, coords[next]));
        }
        mind[next] = -1.0;
    }
    chosen
}

fn argmin(it: impl Iterator<Item = f64>) -> usize {
    it.enumerate()
        .fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b })
        .0
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    it.enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b })
        .0
}

/// Unpenalized thin-plate spline regression basis with `df` columns:
/// `[1, x, y, φ(‖s − κ₁‖), …, φ(‖s − κ_{df−3}‖)]`.
pub fn tps_basis(d: &SpatialDataset, df: usize) -> Result<SpatialBasis, BasisError> {
    let n = d.n();
    if df < 4 || df > n {
        return Err(BasisError::DfOutOfRange { df, n });
    }
    let c = d.coords();
    if c.iter().all(|p| p == &c[0]) {
        return Err(BasisError::DegenerateCoordinates);
    }
    let knots: Vec<[f64; 2]> = farthest_point_knots(c, df - 3).into_iter().map(|i| c[i]).collect();
    let m = Matrix::from_fn(n, df, |i, j| match j {
        0 => 1.0,
        1 => c[i][0],
        2 => c[i][1],
        _ => tps_radial(euclidean(c[i], knots[j - 3])),
    });
    SpatialBasis::from_matrix(BasisKind::ThinPlateSpline, m, BasisMeta::Knots(knots))
}

/// Eigenvector basis of a Laplacian or precision matrix.
pub fn eigen_basis(l: &SymMatrix, m: usize, which: EigenEnd) -> Result<SpatialBasis, BasisError> {
    let e = sym_eigen(l)?;
    eigen_basis_from(&e, m, which, BasisKind::LaplacianEigen)
}

/// Same as [`eigen_basis`] from a precomputed decomposition, so several
/// dimensions can share one eigensolve.
pub fn eigen_basis_from(
    e: &EigenDecomposition,
    m: usize,
    which: EigenEnd,
    kind: BasisKind,
) -> Result<SpatialBasis, BasisError> {
    let n = e.n();
    if m == 0 || m > n {
        return Err(BasisError::MOutOfRange { m, n });
    }
    let idx: Vec<usize> = match which {
        EigenEnd::Smoothest => (0..m).collect(),
        EigenEnd::Roughest => (n - m..n).rev().collect(),
    };
    let matrix = Matrix::from_fn(n, m, |i, j| e.eigenvectors[(i, idx[j])]);
    let values = idx.iter().map(|&k| e.eigenvalues[k]).collect();
    SpatialBasis::from_matrix(kind, matrix, BasisMeta::Eigenvalues(values))
}

/// One 0/1 indicator column per region level, levels sorted.
pub fn region_basis(d: &SpatialDataset) -> Result<SpatialBasis, BasisError> {
    let (Some(labels), Some(levels)) = (d.region(), d.region_levels()) else {
        return Err(BasisError::NoRegionLabels);
    };
    let m = Matrix::from_fn(d.n(), levels.len(), |i, j| {
        if labels[i] == levels[j] {
            1.0
        } else {
            0.0
        }
    });
    SpatialBasis::from_matrix(BasisKind::RegionIndicator, m, BasisMeta::Levels(levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatialdata::{graph_laplacian, SpatialGraph};

    fn grid(n: usize) -> SpatialDataset {
        let coords = (0..n).map(|i| [(i % 5) as f64, (i / 5) as f64 * 0.7]).collect();
        let a = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        SpatialDataset::new(coords, a).unwrap()
    }

    #[test]
    fn tps_column_contract() {
        let d = grid(20);
        let b = tps_basis(&d, 4).unwrap();
        assert_eq!(b.dim(), 4);
        assert!(b.includes_constant());
        let BasisMeta::Knots(k) = b.meta() else { panic!() };
        let at = d.coords().iter().position(|c| c == &k[0]).unwrap();
        assert_eq!(b.matrix()[(at, 3)], 0.0);
        assert_eq!(b.matrix()[(at, 1)], d.coords()[at][0]);
    }

    #[test]
    fn tps_df_bounds() {
        let d = grid(10);
        assert_eq!(tps_basis(&d, 3).unwrap_err(), BasisError::DfOutOfRange { df: 3, n: 10 });
        assert!(tps_basis(&d, 11).is_err());
        assert!(tps_basis(&d, 10).is_ok());
        let same = SpatialDataset::new(vec![[1.0, 2.0]; 5], vec![0.0; 5]).unwrap();
        assert_eq!(tps_basis(&same, 4).unwrap_err(), BasisError::DegenerateCoordinates);
    }

    #[test]
    fn knots_start_near_centroid_and_spread() {
        let c = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [0.0, 1.0], [1.0, 1.0]];
        assert_eq!(farthest_point_knots(&c, 3), vec![2, 0, 1]);
    }

    #[test]
    fn path_eigen_bases() {
        let l = graph_laplacian(&SpatialGraph::new(3, [(0, 1), (1, 2)]).unwrap());
        let smooth = eigen_basis(&l, 1, EigenEnd::Smoothest).unwrap();
        assert!(smooth.includes_constant());
        let rough = eigen_basis(&l, 1, EigenEnd::Roughest).unwrap();
        let s6 = 6f64.sqrt();
        let want = [-1.0 / s6, 2.0 / s6, -1.0 / s6];
        for i in 0..3 {
            assert!((rough.matrix()[(i, 0)] - want[i]).abs() < 1e-12);
        }
        assert!(!rough.includes_constant());
        assert_eq!(
            eigen_basis(&l, 4, EigenEnd::Smoothest).unwrap_err(),
            BasisError::MOutOfRange { m: 4, n: 3 }
        );
    }

    #[test]
    fn full_eigen_basis_leaves_no_instrument() {
        let l = graph_laplacian(&SpatialGraph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap());
        let b = Arc::new(eigen_basis(&l, 4, EigenEnd::Smoothest).unwrap());
        let dec = decompose(&[1.0, -2.0, 0.5, 3.0], &b).unwrap();
        assert!(dec.a_uc.iter().all(|v| v.abs() < 1e-12));
        assert!(dec.zero_instrument);
    }

    #[test]
    fn region_indicators() {
        let d = grid(5)
            .with_region(vec!["b".into(), "a".into(), "b".into(), "a".into(), "b".into()])
            .unwrap();
        let b = region_basis(&d).unwrap();
        assert_eq!(b.matrix().column(0).iter().sum::<f64>(), 2.0);
        assert_eq!(b.matrix().column(1).iter().sum::<f64>(), 3.0);
        assert!(b.includes_constant());
        let b = Arc::new(b);
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let dec = decompose(&a, &b).unwrap();
        let want = [3.0, 3.0, 3.0, 3.0, 3.0];
        for (x, w) in dec.a_c.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
        assert_eq!(region_basis(&grid(5)).unwrap_err(), BasisError::NoRegionLabels);
    }

    #[test]
    fn constant_basis_gives_mean() {
        let b = Arc::new(
            SpatialBasis::from_matrix(BasisKind::RegionIndicator, Matrix::from_fn(4, 1, |_, _| 1.0), BasisMeta::None)
                .unwrap(),
        );
        let dec = decompose(&[1.0, 2.0, 3.0, 6.0], &b).unwrap();
        assert!(dec.a_c.iter().all(|v| (v - 3.0).abs() < 1e-14));
        assert!(!dec.zero_instrument);
        let flat = decompose(&[2.0; 4], &b).unwrap();
        assert!(flat.zero_instrument);
    }
}
