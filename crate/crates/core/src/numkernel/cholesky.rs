use super::{Matrix, NumError, SymMatrix};

/// Jitter values tried in order when a covariance matrix is numerically
/// singular. The first entry is always zero.
pub const DEFAULT_JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Lower-triangular factor `L` with `L Lᵀ = M + jitter · I`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    pub lower: Matrix,
    pub jitter: f64,
}

/// Cholesky factorization that walks `jitter_ladder` until the diagonal
/// shift makes the matrix numerically positive definite.
pub fn cholesky_jittered(m: &SymMatrix, jitter_ladder: &[f64]) -> Result<CholeskyFactor, NumError> {
    let Some(&first) = jitter_ladder.first() else {
        return Err(NumError::InvalidLadder("ladder is empty"));
    };
    if first != 0.0 {
        return Err(NumError::InvalidLadder("first entry must be 0"));
    }
    if jitter_ladder
        .windows(2)
        .any(|w| !(w[1] >= w[0]) || !w[1].is_finite())
    {
        return Err(NumError::InvalidLadder("entries must be finite and ascending"));
    }
    if !m.matrix().is_finite() {
        return Err(NumError::NonFinite);
    }
    for &jitter in jitter_ladder {
        if let Some(lower) = try_cholesky(m, jitter) {
            return Ok(CholeskyFactor { lower, jitter });
        }
    }
    Err(NumError::NotPositiveDefinite {
        max_jitter: *jitter_ladder.last().unwrap(),
    })
}

fn try_cholesky(m: &SymMatrix, jitter: f64) -> Option<Matrix> {
    let n = m.n();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (li, lj) = (l.row(i), l.row(j));
            let s: f64 = li[..j].iter().zip(&lj[..j]).map(|(a, b)| a * b).sum();
            if i == j {
                let d = m.get(i, i) + jitter - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = (m.get(i, j) - s) / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// `L z` for a lower-triangular `L`, touching only the lower triangle.
pub fn lower_mul_vec(lower: &Matrix, z: &[f64]) -> Vec<f64> {
    (0..lower.rows())
        .map(|i| {
            lower.row(i)[..=i]
                .iter()
                .zip(z)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: &[[f64; 2]]) -> SymMatrix {
        SymMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn identity_needs_no_jitter() {
        let id = SymMatrix::new(Matrix::identity(3)).unwrap();
        let f = cholesky_jittered(&id, &[0.0]).unwrap();
        assert_eq!(f.jitter, 0.0);
        assert_eq!(f.lower, Matrix::identity(3));
    }

    #[test]
    fn two_by_two_hand_factor() {
        let f = cholesky_jittered(&sym(&[[4.0, 2.0], [2.0, 3.0]]), &[0.0]).unwrap();
        assert!((f.lower[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(f.lower[(0, 1)], 0.0);
        assert!((f.lower[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((f.lower[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rank_one_matrix_forces_jitter() {
        let f = cholesky_jittered(&sym(&[[1.0, 1.0], [1.0, 1.0]]), &[0.0, 1e-10, 1e-8]).unwrap();
        assert!(f.jitter >= 1e-10);
    }

    #[test]
    fn exhausted_ladder_is_an_error() {
        let m = sym(&[[1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(
            cholesky_jittered(&m, &[0.0, 1e-6]),
            Err(NumError::NotPositiveDefinite { max_jitter: 1e-6 })
        );
    }

    #[test]
    fn ladder_must_start_at_zero_and_ascend() {
        let m = sym(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(cholesky_jittered(&m, &[]), Err(NumError::InvalidLadder(_))));
        assert!(matches!(cholesky_jittered(&m, &[1e-8]), Err(NumError::InvalidLadder(_))));
        assert!(matches!(
            cholesky_jittered(&m, &[0.0, 1e-6, 1e-8]),
            Err(NumError::InvalidLadder(_))
        ));
    }
}
