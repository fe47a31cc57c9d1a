use super::{dot, Matrix, NumError};

/// Relative pivot tolerance: a column whose remaining norm falls below
/// `RANK_TOLERANCE · |R₀₀|` is treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rank: usize,
}

#[derive(Clone, Debug)]
struct Reflector {
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    /// Applies `I − β v vᵀ` to `x[offset..]`.
    fn apply(&self, x: &mut [f64], offset: usize) {
        if self.beta == 0.0 {
            return;
        }
        let tail = &mut x[offset..];
        let s = self.beta * dot(&self.v, tail);
        for (t, v) in tail.iter_mut().zip(&self.v) {
            *t -= s * v;
        }
    }

    /// Householder vector mapping `x` onto `±‖x‖ e₁`. Returns the reflector
    /// and the resulting leading entry.
    fn annihilate(x: &[f64]) -> (Self, f64) {
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (
                Reflector {
                    v: vec![0.0; x.len()],
                    beta: 0.0,
                },
                0.0,
            );
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        let beta = if vv == 0.0 { 0.0 } else { 2.0 / vv };
        (Reflector { v, beta }, alpha)
    }
}

/// Householder QR with column pivoting, `X P = Q R`.
///
/// Factor once, then project or solve against any number of responses.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    n: usize,
    p: usize,
    rank: usize,
    perm: Vec<usize>,
    reflectors: Vec<Reflector>,
    /// Rows `0..rank` of `R`, in pivoted column order.
    r: Matrix,
    /// Complete orthogonal step for rank-deficient designs: QR of `[R₁₁ R₁₂]ᵀ`.
    cod: Option<(Vec<Reflector>, Matrix)>,
}

impl PivotedQr {
    pub fn new(design: &Matrix) -> Result<Self, NumError> {
        let (n, p) = (design.rows(), design.cols());
        if n == 0 || p == 0 {
            return Err(NumError::Empty);
        }
        if !design.is_finite() {
            return Err(NumError::NonFinite);
        }
        let mut cols = design.columns();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut reflectors = Vec::new();
        let steps = n.min(p);
        let mut r = Matrix::zeros(steps, p);
        let mut r00 = 0.0;
        let mut rank = 0;

        for k in 0..steps {
            let (best, best_norm) = (k..p)
                .map(|j| (j, cols[j][k..].iter().map(|a| a * a).sum::<f64>()))
                .fold((k, -1.0), |acc, (j, s)| if s > acc.1 { (j, s) } else { acc });
            let best_norm = best_norm.sqrt();
            if k == 0 {
                r00 = best_norm;
            }
            if best_norm == 0.0 || best_norm <= RANK_TOLERANCE * r00 {
                break;
            }
            cols.swap(k, best);
            perm.swap(k, best);

            let (h, alpha) = Reflector::annihilate(&cols[k][k..]);
            cols[k][k] = alpha;
            for x in cols[k][k + 1..].iter_mut() {
                *x = 0.0;
            }
            for col in cols.iter_mut().skip(k + 1) {
                h.apply(col, k);
            }
            reflectors.push(h);
            rank += 1;
        }

        for i in 0..rank {
            for j in i..p {
                r[(i, j)] = cols[j][i];
            }
        }
        let r = Matrix::from_fn(rank, p, |i, j| r[(i, j)]);

        let cod = if rank < p && rank > 0 {
            // Rows of [R₁₁ R₁₂] become columns of a p × rank matrix.
            let mut tcols: Vec<Vec<f64>> = (0..rank).map(|i| r.row(i).to_vec()).collect();
            let mut zrefl = Vec::with_capacity(rank);
            for k in 0..rank {
                let (h, alpha) = Reflector::annihilate(&tcols[k][k..]);
                tcols[k][k] = alpha;
                for x in tcols[k][k + 1..].iter_mut() {
                    *x = 0.0;
                }
                for col in tcols.iter_mut().skip(k + 1) {
                    h.apply(col, k);
                }
                zrefl.push(h);
            }
            let t = Matrix::from_fn(rank, rank, |i, j| if i <= j { tcols[j][i] } else { 0.0 });
            Some((zrefl, t))
        } else {
            None
        };

        Ok(Self {
            n,
            p,
            rank,
            perm,
            reflectors,
            r,
            cod,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    fn check_len(&self, y: &[f64]) -> Result<(), NumError> {
        if y.len() != self.n {
            return Err(NumError::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        Ok(())
    }

    /// `Qᵀ y`.
    fn qt(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        for (k, h) in self.reflectors.iter().enumerate() {
            h.apply(&mut z, k);
        }
        z
    }

    /// `Q z`.
    fn q(&self, mut z: Vec<f64>) -> Vec<f64> {
        for (k, h) in self.reflectors.iter().enumerate().rev() {
            h.apply(&mut z, k);
        }
        z
    }

    /// Returns `(fitted, residuals)`, each computed through `Q` so the
    /// residuals stay orthogonal to the column space even for tiny fits.
    fn split(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = z.to_vec();
        let mut bottom = z.to_vec();
        for x in top[self.rank..].iter_mut() {
            *x = 0.0;
        }
        for x in bottom[..self.rank].iter_mut() {
            *x = 0.0;
        }
        (self.q(top), self.q(bottom))
    }

    /// Orthogonal projection of `y` onto the column space.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>, NumError> {
        self.check_len(y)?;
        let z = self.qt(y);
        Ok(self.split(&z).0)
    }

    /// Minimum-norm least-squares solution.
    pub fn solve(&self, y: &[f64]) -> Result<LeastSquaresFit, NumError> {
        self.check_len(y)?;
        let z = self.qt(y);
        let (fitted, residuals) = self.split(&z);
        let rk = self.rank;
        let mut pivoted = vec![0.0; self.p];

        match &self.cod {
            None => {
                for i in (0..rk).rev() {
                    let s: f64 = (i + 1..rk).map(|j| self.r[(i, j)] * pivoted[j]).sum();
                    pivoted[i] = (z[i] - s) / self.r[(i, i)];
                }
            }
            Some((zrefl, t)) => {
                // [R₁₁ R₁₂] = Tᵀ Z₁ᵀ, so solve Tᵀ w = z₁ then β = Z [w; 0].
                let mut w = vec![0.0; self.p];
                for i in 0..rk {
                    let s: f64 = (0..i).map(|j| t[(j, i)] * w[j]).sum();
                    w[i] = (z[i] - s) / t[(i, i)];
                }
                for (k, h) in zrefl.iter().enumerate().rev() {
                    h.apply(&mut w, k);
                }
                pivoted = w;
            }
        }

        let mut coefficients = vec![0.0; self.p];
        for (k, &j) in self.perm.iter().enumerate() {
            coefficients[j] = pivoted[k];
        }
        Ok(LeastSquaresFit {
            coefficients,
            fitted,
            residuals,
            rank: rk,
        })
    }
}

/// Least squares `min ‖y − Xβ‖²` with minimum-norm resolution of rank
/// deficiency.
pub fn least_squares(design: &Matrix, response: &[f64]) -> Result<LeastSquaresFit, NumError> {
    if design.rows() != response.len() {
        return Err(NumError::DimensionMismatch {
            expected: design.rows(),
            found: response.len(),
        });
    }
    PivotedQr::new(design)?.solve(response)
}
