//! Matérn Gaussian-process simulation of confounded spatial exposures.

mod kriging;
mod layout;
mod matern;
mod replicate;
mod truth;

pub use kriging::{kriging_split, KrigingParams};
pub use layout::{halton, halton_points, load_layout, load_layout_reader, voronoi_labels, CoordsSource, Layout};
pub use matern::{matern_corr, matern_corr_with, matern_matrix, MATERN_NU};
pub use replicate::{
    run_replications, run_replications_with, summarize, Estimate, MethodSummary, ReplicateEstimator, ReplicateRow,
    ReplicationTable, Schedule,
};
pub use truth::{true_truncated_effect, FrozenTruth, TruthEstimate, FROZEN_TRUTHS, MIN_TRUTH_REPS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{cholesky_jittered, lower_mul_vec, CholeskyFactor, NumError, SymMatrix, DEFAULT_JITTER_LADDER};
use crate::spatialdata::{DataError, SpatialDataset};

/// Name of the generator recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("layout: {0}")]
    Layout(String),

    #[error("truth oracle needs at least {min} replicates, got {got}")]
    TooFewReps { min: usize, got: usize },

    #[error("covariance factorization failed for the {block} block: {source}")]
    Factorization { block: &'static str, source: NumError },

    #[error(transparent)]
    Numeric(#[from] NumError),

    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    M1,
    M2,
    M3,
}

impl Mechanism {
    pub fn default_theta_uc(self) -> f64 {
        match self {
            Self::M2 => 0.05,
            Self::M1 | Self::M3 => 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeModel {
    Linear,
    #[serde(alias = "non_linear")]
    Nonlinear,
}

/// `E[Y | A, U] = b0 + bA·A + bU·U + bAU·A·U + bA2·A² + bA2U·A²·U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeCoefficients {
    pub intercept: f64,
    pub a: f64,
    pub u: f64,
    pub au: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default)]
    pub a2u: f64,
}

impl OutcomeCoefficients {
    pub fn for_model(model: OutcomeModel) -> Self {
        let (a2, a2u) = match model {
            OutcomeModel::Linear => (0.0, 0.0),
            OutcomeModel::Nonlinear => (-0.1, 0.1),
        };
        Self {
            intercept: -0.5,
            a: 1.0,
            u: -1.0,
            au: -0.5,
            a2,
            a2u,
        }
    }

    #[inline]
    pub fn mean(&self, a: f64, u: f64) -> f64 {
        self.intercept + self.a * a + self.u * u + self.au * a * u + a * a * (self.a2 + self.a2u * u)
    }
}

/// One data-generating process. Deserializing fills every missing field with
/// the defaults for the named mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ScenarioSpec")]
pub struct SimScenario {
    pub mechanism: Mechanism,
    pub theta_uc: f64,
    pub theta_c: f64,
    pub cross_corr: f64,
    /// `(μ_uc, μ_c, μ_u)`.
    pub means: [f64; 3],
    pub outcome_model: OutcomeModel,
    /// Overrides the coefficients implied by `outcome_model`.
    pub outcome_coefficients: Option<OutcomeCoefficients>,
    pub noise_sd: f64,
    pub n: usize,
    pub seed: u64,
    pub coords: CoordsSource,
    pub matern_scaled_argument: bool,
    pub jitter_ladder: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    #[serde(default = "default_mechanism")]
    mechanism: Mechanism,
    theta_uc: Option<f64>,
    theta_c: Option<f64>,
    cross_corr: Option<f64>,
    means: Option<[f64; 3]>,
    outcome_model: Option<OutcomeModel>,
    outcome_coefficients: Option<OutcomeCoefficients>,
    noise_sd: Option<f64>,
    n: Option<usize>,
    seed: Option<u64>,
    coords: Option<CoordsSource>,
    matern_scaled_argument: Option<bool>,
    jitter_ladder: Option<Vec<f64>>,
}

fn default_mechanism() -> Mechanism {
    Mechanism::M1
}

impl From<ScenarioSpec> for SimScenario {
    fn from(s: ScenarioSpec) -> Self {
        let d = SimScenario::new(s.mechanism, s.outcome_model.unwrap_or(OutcomeModel::Linear));
        Self {
            theta_uc: s.theta_uc.unwrap_or(d.theta_uc),
            theta_c: s.theta_c.unwrap_or(d.theta_c),
            cross_corr: s.cross_corr.unwrap_or(d.cross_corr),
            means: s.means.unwrap_or(d.means),
            outcome_coefficients: s.outcome_coefficients,
            noise_sd: s.noise_sd.unwrap_or(d.noise_sd),
            n: s.n.unwrap_or(d.n),
            seed: s.seed.unwrap_or(d.seed),
            coords: s.coords.unwrap_or(d.coords),
            matern_scaled_argument: s.matern_scaled_argument.unwrap_or(d.matern_scaled_argument),
            jitter_ladder: s.jitter_ladder.unwrap_or(d.jitter_ladder),
            ..d
        }
    }
}

impl Default for SimScenario {
    fn default() -> Self {
        Self::new(Mechanism::M1, OutcomeModel::Linear)
    }
}

impl SimScenario {
    pub fn new(mechanism: Mechanism, outcome_model: OutcomeModel) -> Self {
        Self {
            mechanism,
            theta_uc: mechanism.default_theta_uc(),
            theta_c: 0.5,
            cross_corr: 0.95,
            means: [0.1, -0.2, 0.3],
            outcome_model,
            outcome_coefficients: None,
            noise_sd: 1.0,
            n: 503,
            seed: 1,
            coords: CoordsSource::default(),
            matern_scaled_argument: true,
            jitter_ladder: DEFAULT_JITTER_LADDER.to_vec(),
        }
    }

    pub fn coefficients(&self) -> OutcomeCoefficients {
        self.outcome_coefficients
            .unwrap_or_else(|| OutcomeCoefficients::for_model(self.outcome_model))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        for (name, t) in [("theta_uc", self.theta_uc), ("theta_c", self.theta_c)] {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("{name} must be positive, got {t}"));
            }
        }
        if !(self.cross_corr.abs() < 1.0) {
            return bad(format!("cross_corr must lie in (-1, 1), got {}", self.cross_corr));
        }
        if !self.means.iter().all(|m| m.is_finite()) {
            return bad("means must be finite".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be nonnegative, got {}", self.noise_sd));
        }
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.jitter_ladder.is_empty() {
            return bad("jitter_ladder is empty".into());
        }
        Ok(())
    }

    /// `(key, value)` pairs describing the generator, for CSV headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("mechanism".into(), format!("{:?}", self.mechanism)),
            ("outcome_model".into(), format!("{:?}", self.outcome_model).to_lowercase()),
            ("theta_uc".into(), self.theta_uc.to_string()),
            ("theta_c".into(), self.theta_c.to_string()),
            ("cross_corr".into(), self.cross_corr.to_string()),
            (
                "matern".into(),
                if self.matern_scaled_argument {
                    "nu=2, argument sqrt(2 nu) d / theta".into()
                } else {
                    "nu=2, argument d / theta".into()
                },
            ),
            ("rng".into(), RNG_NAME.into()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

fn same_region(region: Option<&[String]>, mechanism: Mechanism) -> impl Fn(usize, usize) -> bool + '_ {
    move |i, j| match (mechanism, region) {
        (Mechanism::M3, Some(r)) => r[i] == r[j],
        _ => true,
    }
}

/// Full `3n × 3n` covariance of `(A_UC, A_C, U)`.
pub fn joint_covariance(
    coords: &[[f64; 2]],
    region: Option<&[String]>,
    scenario: &SimScenario,
) -> Result<SymMatrix, SimError> {
    let n = coords.len();
    let keep = same_region(region, scenario.mechanism);
    let r_uc = matern_matrix(coords, scenario.theta_uc, scenario.matern_scaled_argument, &keep)?;
    let r_c = matern_matrix(coords, scenario.theta_c, scenario.matern_scaled_argument, &keep)?;
    let rho = scenario.cross_corr;
    Ok(SymMatrix::from_upper_fn(3 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let (ii, jj) = (i % n, j % n);
        match (bi, bj) {
            (0, 0) => r_uc.get(ii, jj),
            (0, _) => 0.0,
            (1, 1) | (2, 2) => r_c.get(ii, jj),
            _ => rho * r_c.get(ii, jj),
        }
    })?)
}

/// The hidden components behind one draw.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenComponents {
    pub a_uc: Vec<f64>,
    pub a_c: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimDraw {
    pub replicate: usize,
    pub seed: u64,
    pub dataset: SpatialDataset,
    pub truth: HiddenComponents,
}

/// A scenario with its layout resolved and both correlation blocks factored.
///
/// `(A_C, U)` has covariance `[[1, ρ], [ρ, 1]] ⊗ R(θ_c)`, so one factor of
/// `R(θ_c)` serves both components.
#[derive(Clone, Debug)]
pub struct Simulator {
    scenario: SimScenario,
    layout: Layout,
    chol_uc: CholeskyFactor,
    chol_c: CholeskyFactor,
}

impl Simulator {
    pub fn new(scenario: SimScenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let layout = scenario.coords.resolve(scenario.n)?;
        Self::with_layout(scenario, layout)
    }

    pub fn with_layout(scenario: SimScenario, layout: Layout) -> Result<Self, SimError> {
        scenario.validate()?;
        if layout.coords.len() != scenario.n {
            return Err(SimError::InvalidScenario(format!(
                "layout has {} points, scenario n = {}",
                layout.coords.len(),
                scenario.n
            )));
        }
        if scenario.mechanism == Mechanism::M3 {
            let levels = layout.region.as_ref().map_or(0, |r| {
                let mut v: Vec<&String> = r.iter().collect();
                v.sort();
                v.dedup();
                v.len()
            });
            if levels < 2 {
                return Err(SimError::InvalidScenario(
                    "mechanism M3 needs region labels with at least 2 levels".into(),
                ));
            }
        }
        let (chol_uc, chol_c) = {
            let keep = same_region(layout.region.as_deref(), scenario.mechanism);
            let factor = |theta: f64, block: &'static str| -> Result<CholeskyFactor, SimError> {
                let r = matern_matrix(&layout.coords, theta, scenario.matern_scaled_argument, &keep)?;
                cholesky_jittered(&r, &scenario.jitter_ladder)
                    .map_err(|source| SimError::Factorization { block, source })
            };
            (factor(scenario.theta_uc, "A_UC")?, factor(scenario.theta_c, "A_C/U")?)
        };
        Ok(Self {
            scenario,
            layout,
            chol_uc,
            chol_c,
        })
    }

    pub fn scenario(&self) -> &SimScenario {
        &self.scenario
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n(&self) -> usize {
        self.scenario.n
    }

    /// Jitter added to the `A_UC` and `A_C/U` blocks.
    pub fn jitter(&self) -> (f64, f64) {
        (self.chol_uc.jitter, self.chol_c.jitter)
    }

    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut m = self.scenario.metadata();
        m.push(("n".into(), self.n().to_string()));
        m.push(("jitter_uc".into(), self.chol_uc.jitter.to_string()));
        m.push(("jitter_c".into(), self.chol_c.jitter.to_string()));
        m
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        self.scenario.seed.wrapping_add(replicate as u64)
    }

    /// Draw `replicate`, seeded by `seed + replicate`.
    pub fn draw(&self, replicate: usize) -> Result<SimDraw, SimError> {
        let seed = self.replicate_seed(replicate);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = self.n();
        let normals = |rng: &mut ChaCha20Rng| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let z1 = normals(&mut rng);
        let z2 = normals(&mut rng);
        let z3 = normals(&mut rng);
        let eps = normals(&mut rng);

        let [mu_uc, mu_c, mu_u] = self.scenario.means;
        let rho = self.scenario.cross_corr;
        let rho_perp = (1.0 - rho * rho).sqrt();
        let g_uc = lower_mul_vec(&self.chol_uc.lower, &z1);
        let g2 = lower_mul_vec(&self.chol_c.lower, &z2);
        let g3 = lower_mul_vec(&self.chol_c.lower, &z3);
        let a_uc: Vec<f64> = g_uc.iter().map(|g| mu_uc + g).collect();
        let a_c: Vec<f64> = g2.iter().map(|g| mu_c + g).collect();
        let u: Vec<f64> = g2.iter().zip(&g3).map(|(x, y)| mu_u + rho * x + rho_perp * y).collect();
        let a: Vec<f64> = a_uc.iter().zip(&a_c).map(|(x, y)| x + y).collect();

        let coef = self.scenario.coefficients();
        let sd = self.scenario.noise_sd;
        let y: Vec<f64> = (0..n).map(|i| coef.mean(a[i], u[i]) + sd * eps[i]).collect();

        let mut dataset = SpatialDataset::new(self.layout.coords.clone(), a)?.with_outcome(y)?;
        if let Some(r) = &self.layout.region {
            dataset = dataset.with_region(r.clone())?;
        }
        Ok(SimDraw {
            replicate,
            seed,
            dataset,
            truth: HiddenComponents { a_uc, a_c, u },
        })
    }
}

/// Builds the simulator for `scenario` and returns replicate 0.
pub fn sample_draw(scenario: &SimScenario) -> Result<SimDraw, SimError> {
    Simulator::new(scenario.clone())?.draw(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mechanism: Mechanism) -> SimScenario {
        SimScenario {
            n: 40,
            ..SimScenario::new(mechanism, OutcomeModel::Linear)
        }
    }

    #[test]
    fn defaults_follow_mechanism() {
        assert_eq!(SimScenario::new(Mechanism::M2, OutcomeModel::Linear).theta_uc, 0.05);
        let s: SimScenario = serde_json::from_str(r#"{"mechanism":"M3"}"#).unwrap();
        assert_eq!((s.theta_uc, s.theta_c, s.cross_corr, s.n), (0.01, 0.5, 0.95, 503));
        let s: SimScenario = serde_json::from_str(r#"{"mechanism":"M2","theta_uc":0.2}"#).unwrap();
        assert_eq!(s.theta_uc, 0.2);
        assert!(serde_json::from_str::<SimScenario>(r#"{"thetauc":0.2}"#).is_err());
        let back: SimScenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn single_site_covariance() {
        let s = SimScenario::default();
        let c = joint_covariance(&[[0.0, 0.0]], None, &s).unwrap();
        let want = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.95], [0.0, 0.95, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.get(i, j), want[i][j]);
            }
        }
    }

    #[test]
    fn two_sites_at_theta_c() {
        let s = SimScenario {
            matern_scaled_argument: false,
            ..SimScenario::default()
        };
        let c = joint_covariance(&[[0.0, 0.0], [0.5, 0.0]], None, &s).unwrap();
        // rows: A_UC1 A_UC2 A_C1 A_C2 U1 U2
        assert!((c.get(2, 5) - 0.95 * 1.6248388986351775 / 2.0).abs() < 1e-10);
        assert_eq!(c.get(0, 3), 0.0);
    }

    #[test]
    fn m3_singletons_are_block_diagonal() {
        let s = small(Mechanism::M3);
        let coords = halton_points(4, [1.2, 0.9], 0);
        let region: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let c = joint_covariance(&coords, Some(&region), &s).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if i % 4 != j % 4 {
                    assert_eq!(c.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn draws_are_reproducible_and_additive() {
        let sim = Simulator::new(small(Mechanism::M1)).unwrap();
        let a = sim.draw(3).unwrap();
        let b = sim.draw(3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.dataset.exposure(), sim.draw(4).unwrap().dataset.exposure());
        for i in 0..40 {
            assert_eq!(a.dataset.exposure()[i], a.truth.a_uc[i] + a.truth.a_c[i]);
        }
    }

    #[test]
    fn zero_noise_recovers_outcome_mean() {
        let s = SimScenario {
            noise_sd: 0.0,
            ..small(Mechanism::M1)
        };
        let d = sample_draw(&s).unwrap();
        let (a, y, u) = (d.dataset.exposure(), d.dataset.outcome().unwrap(), &d.truth.u);
        for i in 0..40 {
            assert!((y[i] + 0.5 + u[i] + 0.5 * a[i] * u[i] - a[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn m3_needs_two_regions() {
        let s = SimScenario {
            coords: CoordsSource::Synthetic {
                extent: [1.2, 0.9],
                skip: 0,
                regions: 1,
                region_seed: 0,
            },
            ..small(Mechanism::M3)
        };
        assert!(matches!(Simulator::new(s), Err(SimError::InvalidScenario(_))));
    }
}
