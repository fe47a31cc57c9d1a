#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{SimDraw, Simulator};

/// Point estimate with an optional confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci: Option<(f64, f64)>,
}

impl Estimate {
    pub fn point(value: f64) -> Self {
        Self { value, ci: None }
    }
}

/// A suite of estimators applied to every simulated draw.
pub trait ReplicateEstimator: Sync {
    /// Method names, in output order.
    fn methods(&self) -> Vec<String>;

    /// One result per method, in the order of [`ReplicateEstimator::methods`].
    fn estimate(&self, draw: &SimDraw) -> Vec<Result<Estimate, String>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub method: String,
    pub estimate: Option<Estimate>,
    /// Set when the draw or the estimator failed.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ReplicationTable {
    pub methods: Vec<String>,
    /// Ordered by replicate, then method.
    pub rows: Vec<ReplicateRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Replicates spread over the current rayon pool; identical to
    /// `Sequential` without the `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

pub fn run_replications(sim: &Simulator, m: usize, suite: &dyn ReplicateEstimator) -> ReplicationTable {
    run_replications_with(sim, m, suite, Schedule::Parallel)
}

/// Runs `m` replicates. Each replicate depends only on `(seed, index)` and
/// rows are assembled in index order, so the table does not depend on the
/// schedule or the thread count.
pub fn run_replications_with(
    sim: &Simulator,
    m: usize,
    suite: &dyn ReplicateEstimator,
    schedule: Schedule,
) -> ReplicationTable {
    let methods = suite.methods();
    let one = |r: usize| replicate_rows(sim, r, suite, &methods);
    let per_rep: Vec<Vec<ReplicateRow>> = match schedule {
        #[cfg(feature = "parallel")]
        Schedule::Parallel => (0..m).into_par_iter().map(one).collect(),
        _ => (0..m).map(one).collect(),
    };
    ReplicationTable {
        methods,
        rows: per_rep.into_iter().flatten().collect(),
    }
}

fn replicate_rows(sim: &Simulator, r: usize, suite: &dyn ReplicateEstimator, methods: &[String]) -> Vec<ReplicateRow> {
    let seed = sim.replicate_seed(r);
    let row = |method: &String, res: Result<Estimate, String>| {
        let (estimate, error) = match res {
            Ok(e) if e.value.is_finite() => (Some(e), None),
            Ok(e) => (None, Some(format!("non-finite estimate {}", e.value))),
            Err(e) => (None, Some(e)),
        };
        ReplicateRow {
            replicate: r,
            seed,
            method: method.clone(),
            estimate,
            error,
        }
    };
    match sim.draw(r) {
        Ok(draw) => {
            let mut results = suite.estimate(&draw);
            results.resize_with(methods.len(), || Err("estimator returned no result".into()));
            methods.iter().zip(results).map(|(m, res)| row(m, res)).collect()
        }
        Err(e) => methods.iter().map(|m| row(m, Err(format!("simulation: {e}")))).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub succeeded: usize,
    pub failed: usize,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Monte Carlo standard error of `bias`.
    pub bias_se: f64,
    /// Share of intervals covering the truth, over rows that report one.
    pub coverage: Option<f64>,
}

/// Bias and RMSE per method against `truth`. Failed rows are counted and
/// excluded.
pub fn summarize(table: &ReplicationTable, truth: f64) -> Vec<MethodSummary> {
    table
        .methods
        .iter()
        .map(|method| {
            let rows: Vec<&ReplicateRow> = table.rows.iter().filter(|r| &r.method == method).collect();
            let est: Vec<Estimate> = rows.iter().filter_map(|r| r.estimate).collect();
            let k = est.len();
            let values: Vec<f64> = est.iter().map(|e| e.value).collect();
            let mean = crate::numkernel::mean(&values);
            let mse = values.iter().map(|v| (v - truth) * (v - truth)).sum::<f64>() / k as f64;
            let sd = if k > 1 { crate::numkernel::variance(&values).sqrt() } else { 0.0 };
            let with_ci: Vec<(f64, f64)> = est.iter().filter_map(|e| e.ci).collect();
            let coverage = (!with_ci.is_empty()).then(|| {
                with_ci.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count() as f64 / with_ci.len() as f64
            });
            MethodSummary {
                method: method.clone(),
                succeeded: k,
                failed: rows.len() - k,
                mean,
                bias: mean - truth,
                rmse: mse.sqrt(),
                bias_se: sd / (k as f64).sqrt(),
                coverage,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpsim::SimScenario;

    struct Oracle(f64);

    impl ReplicateEstimator for Oracle {
        fn methods(&self) -> Vec<String> {
            vec!["oracle".into(), "flaky".into()]
        }

        fn estimate(&self, draw: &SimDraw) -> Vec<Result<Estimate, String>> {
            let flaky = if draw.replicate.is_multiple_of(2) {
                Ok(Estimate {
                    value: draw.dataset.exposure()[0],
                    ci: Some((-1e9, 1e9)),
                })
            } else {
                Err("boom".into())
            };
            vec![Ok(Estimate::point(self.0)), flaky]
        }
    }

    fn sim() -> Simulator {
        Simulator::new(SimScenario {
            n: 30,
            ..SimScenario::default()
        })
        .unwrap()
    }

    #[test]
    fn oracle_has_zero_bias_and_failures_are_rows() {
        let sim = sim();
        let t = run_replications(&sim, 5, &Oracle(1.07));
        assert_eq!(t.rows.len(), 10);
        assert_eq!(t.rows[3].error.as_deref(), Some("boom"));
        let s = summarize(&t, 1.07);
        assert_eq!((s[0].bias, s[0].rmse, s[0].failed), (0.0, 0.0, 0));
        assert_eq!((s[1].succeeded, s[1].failed, s[1].coverage), (3, 2, Some(1.0)));
        assert!(s[1].rmse >= s[1].bias.abs());
    }

    #[test]
    fn schedules_agree() {
        let sim = sim();
        let a = run_replications_with(&sim, 6, &Oracle(0.0), Schedule::Parallel);
        let b = run_replications_with(&sim, 6, &Oracle(0.0), Schedule::Sequential);
        assert_eq!(a, b);
        assert_eq!(run_replications(&sim, 1, &Oracle(0.0)).rows.len(), 2);
    }
}
