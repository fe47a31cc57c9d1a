use super::{Matrix, NumError, SymMatrix};

pub const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending. Column `j` of
/// `eigenvectors` pairs with `eigenvalues[j]`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.column(j)
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        let v = &self.eigenvectors;
        Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)]).sum()
        })
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Each eigenvector is normalized so its largest-magnitude entry is positive
/// (ties go to the lowest index).
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenDecomposition, NumError> {
    if !m.matrix().is_finite() {
        return Err(NumError::NonFinite);
    }
    let n = m.n();
    let mut a = m.matrix().clone();
    // Rows of `vt` are the eigenvectors, so rotations touch contiguous memory.
    let mut vt = Matrix::identity(n);
    let target = JACOBI_TOL * a.frobenius();

    let mut sweeps = 0;
    loop {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(NumError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if sweeps > 4 && negligible(apq, app) && negligible(apq, aqq) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = 0.5 * (aqq - app) / apq;
                let mut t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                if theta < 0.0 {
                    t = -t;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                rotate_rows(&mut a, p, q, c, s);
                for k in 0..n {
                    if k != p && k != q {
                        a[(k, p)] = a[(p, k)];
                        a[(k, q)] = a[(q, k)];
                    }
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                rotate_rows(&mut vt, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = vt.row(src);
        let sign = sign_for(v);
        for i in 0..n {
            eigenvectors[(i, col)] = sign * v[i];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

#[inline]
fn negligible(apq: f64, diag: f64) -> bool {
    diag.abs() + 100.0 * apq.abs() == diag.abs()
}

/// rows p, q ← (c·row_p − s·row_q, s·row_p + c·row_q)
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * cols);
    let rp = &mut lo[p * cols..(p + 1) * cols];
    let rq = &mut hi[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for (j, x) in a.row(i).iter().enumerate() {
            if i != j {
                s += x * x;
            }
        }
    }
    s.sqrt()
}

fn sign_for(v: &[f64]) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pick = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    if v[pick] < 0.0 {
        -1.0
    } else {
        1.0
    }
}
