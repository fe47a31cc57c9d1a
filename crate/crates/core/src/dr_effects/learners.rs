use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::DrError;
use crate::numkernel::{least_squares, Matrix};

/// Regressors in the stack. All are linear in their parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Mean,
    Linear,
    /// Linear plus every pairwise product of distinct inputs.
    Interactions,
    /// Linear plus `a²`. Without an exposure input this is [`Learner::Linear`].
    Quadratic,
}

impl Learner {
    pub const OUTCOME_STACK: [Learner; 4] = [Learner::Mean, Learner::Linear, Learner::Interactions, Learner::Quadratic];
    pub const DENSITY_STACK: [Learner; 3] = [Learner::Mean, Learner::Linear, Learner::Interactions];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Linear => "linear",
            Self::Interactions => "interactions",
            Self::Quadratic => "quadratic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Term {
    One,
    W(usize),
    A,
    Ww(usize, usize),
    Wa(usize),
    Aa,
}

impl Term {
    /// `(factor, degree in a)`.
    #[inline]
    fn split(self, w: &[f64]) -> (f64, usize) {
        match self {
            Term::One => (1.0, 0),
            Term::W(k) => (w[k], 0),
            Term::A => (1.0, 1),
            Term::Ww(k, l) => (w[k] * w[l], 0),
            Term::Wa(k) => (w[k], 1),
            Term::Aa => (1.0, 2),
        }
    }

    #[inline]
    fn value(self, w: &[f64], a: f64) -> f64 {
        let (f, deg) = self.split(w);
        match deg {
            0 => f,
            1 => f * a,
            _ => f * a * a,
        }
    }
}

fn terms(learner: Learner, q: usize, with_a: bool) -> Vec<Term> {
    let mut t = vec![Term::One];
    if learner == Learner::Mean {
        return t;
    }
    t.extend((0..q).map(Term::W));
    if with_a {
        t.push(Term::A);
    }
    match learner {
        Learner::Interactions => {
            for k in 0..q {
                for l in k + 1..q {
                    t.push(Term::Ww(k, l));
                }
            }
            if with_a {
                t.extend((0..q).map(Term::Wa));
            }
        }
        Learner::Quadratic if with_a => t.push(Term::Aa),
        _ => {}
    }
    t
}

/// Row-major feature rows, one per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub rows: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

impl Features {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn q(&self) -> usize {
        self.names.len()
    }

    pub fn subset(&self, keep: &[usize]) -> Features {
        Features {
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            names: self.names.clone(),
        }
    }

    /// Centers and scales every column by its full-sample moments. Constant
    /// columns are centered only.
    pub fn standardized(columns: Vec<(String, Vec<f64>)>, n: usize) -> Result<Features, DrError> {
        let mut rows = vec![Vec::with_capacity(columns.len()); n];
        let mut names = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n {
                return Err(DrError::LengthMismatch {
                    what: "feature column",
                    expected: n,
                    found: col.len(),
                });
            }
            if !col.iter().all(|v| v.is_finite()) {
                return Err(DrError::SingularDesign(format!("feature `{name}` has non-finite values")));
            }
            let m = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            let s = if sd > 0.0 { sd } else { 1.0 };
            for (r, v) in rows.iter_mut().zip(&col) {
                r.push((v - m) / s);
            }
            names.push(name);
        }
        Ok(Features { rows, names })
    }
}

/// One learner fitted by least squares.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedLearner {
    pub learner: Learner,
    terms: Vec<Term>,
    pub coefficients: Vec<f64>,
}

impl FittedLearner {
    fn fit(learner: Learner, w: &[&[f64]], a: Option<&[f64]>, y: &[f64]) -> Result<Self, DrError> {
        let q = w.first().map_or(0, |r| r.len());
        let terms = terms(learner, q, a.is_some());
        let x = Matrix::from_fn(y.len(), terms.len(), |i, j| terms[j].value(w[i], a.map_or(0.0, |a| a[i])));
        let fit = least_squares(&x, y).map_err(|e| DrError::SingularDesign(format!("{} learner: {e}", learner.name())))?;
        if !fit.coefficients.iter().all(|c| c.is_finite()) {
            return Err(DrError::SingularDesign(format!("{} learner has non-finite coefficients", learner.name())));
        }
        Ok(Self {
            learner,
            terms,
            coefficients: fit.coefficients,
        })
    }

    pub fn predict(&self, w: &[f64], a: f64) -> f64 {
        self.terms.iter().zip(&self.coefficients).map(|(t, c)| c * t.value(w, a)).sum()
    }

    /// `(α, β, γ)` with prediction `α + β a + γ a²` at covariates `w`.
    pub fn poly_in_a(&self, w: &[f64]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (t, c) in self.terms.iter().zip(&self.coefficients) {
            let (f, deg) = t.split(w);
            p[deg] += c * f;
        }
        p
    }
}

/// Convex combination of fitted learners.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedRegressor {
    pub learners: Vec<Learner>,
    pub weights: Vec<f64>,
    /// Full-data fits, `None` where the weight is zero.
    pub fits: Vec<Option<FittedLearner>>,
    pub uses_exposure: bool,
    /// Out-of-fold squared-error loss of the stacked prediction.
    pub cv_risk: f64,
}

impl StackedRegressor {
    pub fn predict(&self, w: &[f64], a: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.fits)
            .filter_map(|(wt, f)| f.as_ref().map(|f| wt * f.predict(w, a)))
            .sum()
    }

    pub fn poly_in_a(&self, w: &[f64]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (wt, f) in self.weights.iter().zip(&self.fits) {
            if let Some(f) = f {
                let c = f.poly_in_a(w);
                for k in 0..3 {
                    p[k] += wt * c[k];
                }
            }
        }
        p
    }
}

/// Fold label of every unit: position in a seeded permutation modulo `k`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, DrError> {
    if k < 2 || k > n {
        return Err(DrError::KTooLarge { k, n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

fn sse(y: &[f64], cols: &[Vec<f64>], w: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, yi)| {
            let p: f64 = cols.iter().zip(w).map(|(c, wt)| wt * c[i]).sum();
            (yi - p) * (yi - p)
        })
        .sum()
}

/// Minimizes `‖y − Σ w_l p_l‖²` over the probability simplex.
///
/// Every support set is tried with the sum constraint substituted out; the
/// first strictly better feasible candidate wins, so exact ties favour
/// earlier learners and smaller supports.
pub fn simplex_least_squares(y: &[f64], preds: &[Vec<f64>]) -> Result<Vec<f64>, DrError> {
    let l = preds.len();
    if l == 0 {
        return Err(DrError::InvalidConfig("empty learner stack".into()));
    }
    let n = y.len();
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << l))
        .map(|mask| (0..l).filter(|&j| mask & (1 << j) != 0).collect())
        .collect();
    subsets.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let floor = 1e-12 * y.iter().map(|v| v * v).sum::<f64>();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in subsets {
        let last = *s.last().unwrap();
        let mut w = vec![0.0; l];
        if s.len() == 1 {
            w[last] = 1.0;
        } else {
            let others = &s[..s.len() - 1];
            let x = Matrix::from_fn(n, others.len(), |i, j| preds[others[j]][i] - preds[last][i]);
            let r: Vec<f64> = (0..n).map(|i| y[i] - preds[last][i]).collect();
            let fit = least_squares(&x, &r).map_err(|e| DrError::SingularDesign(format!("stacking: {e}")))?;
            if fit.coefficients.iter().any(|c| !c.is_finite() || *c < 0.0) {
                continue;
            }
            let rest = 1.0 - fit.coefficients.iter().sum::<f64>();
            if rest < 0.0 {
                continue;
            }
            for (j, c) in others.iter().zip(&fit.coefficients) {
                w[*j] = *c;
            }
            w[last] = rest;
        }
        let obj = sse(y, preds, &w);
        let better = match &best {
            None => true,
            Some((b, _)) => obj < b * (1.0 - 1e-10) - floor,
        };
        if better {
            best = Some((obj, w));
        }
    }
    let (_, mut w) = best.expect("singletons are always feasible");
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Fits each learner on `k` folds, stacks the out-of-fold predictions, and
/// refits the learners with positive weight on all units.
pub fn fit_stack(
    learners: &[Learner],
    w: &[&[f64]],
    a: Option<&[f64]>,
    y: &[f64],
    k: usize,
    fold_seed: u64,
) -> Result<StackedRegressor, DrError> {
    let n = y.len();
    if learners.is_empty() {
        return Err(DrError::InvalidConfig("empty learner stack".into()));
    }
    let fold = fold_assignment(n, k, fold_seed)?;
    let mut oof = vec![vec![0.0; n]; learners.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let wt: Vec<&[f64]> = train.iter().map(|&i| w[i]).collect();
        let at: Option<Vec<f64>> = a.map(|a| train.iter().map(|&i| a[i]).collect());
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        for (li, &learner) in learners.iter().enumerate() {
            let fit = FittedLearner::fit(learner, &wt, at.as_deref(), &yt)?;
            for i in (0..n).filter(|&i| fold[i] == f) {
                oof[li][i] = fit.predict(w[i], a.map_or(0.0, |a| a[i]));
            }
        }
    }
    let weights = simplex_least_squares(y, &oof)?;
    let cv_risk = sse(y, &oof, &weights) / n as f64;
    let fits = learners
        .iter()
        .zip(&weights)
        .map(|(&l, &wt)| if wt > 0.0 { FittedLearner::fit(l, w, a, y).map(Some) } else { Ok(None) })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StackedRegressor {
        learners: learners.to_vec(),
        weights,
        fits,
        uses_exposure: a.is_some(),
        cv_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_lists() {
        assert_eq!(terms(Learner::Mean, 3, true).len(), 1);
        assert_eq!(terms(Learner::Linear, 2, true).len(), 4);
        // 1, w1, w2, a, w1w2, w1a, w2a
        assert_eq!(terms(Learner::Interactions, 2, true).len(), 7);
        assert_eq!(terms(Learner::Quadratic, 2, false), terms(Learner::Linear, 2, false));
    }

    #[test]
    fn poly_matches_prediction() {
        let w: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64).cos()]).collect();
        let wr: Vec<&[f64]> = w.iter().map(|r| r.as_slice()).collect();
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.11).exp().ln_1p()).collect();
        let y: Vec<f64> = (0..30).map(|i| w[i][0] * a[i] + a[i] * a[i] - w[i][1]).collect();
        for l in Learner::OUTCOME_STACK {
            let f = FittedLearner::fit(l, &wr, Some(&a), &y).unwrap();
            let p = f.poly_in_a(&w[4]);
            let at = 0.7;
            assert!((p[0] + p[1] * at + p[2] * at * at - f.predict(&w[4], at)).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_picks_exact_learner() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let preds = vec![vec![2.5; 4], y.clone(), vec![0.0, 0.0, 1.0, 1.0]];
        let w = simplex_least_squares(&y, &preds).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn simplex_mixes_when_interior() {
        let y = vec![1.0, 1.0];
        let preds = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        let w = simplex_least_squares(&y, &preds).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_assignment(23, 5, 0).unwrap();
        for k in 0..5 {
            let c = f.iter().filter(|&&v| v == k).count();
            assert!(c == 4 || c == 5);
        }
        assert!(matches!(fold_assignment(3, 5, 0), Err(DrError::KTooLarge { .. })));
    }
}
