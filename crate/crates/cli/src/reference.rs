//! Reference bias and RMSE (×10²) for the six benchmark scenarios, with the
//! tolerance bands used by `benchmark`.

use spatial_iv::dr_effects::BenchmarkMethod;
use spatial_iv::gpsim::{Mechanism, OutcomeModel, SimScenario};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub mechanism: Mechanism,
    pub outcome: OutcomeModel,
    pub method: BenchmarkMethod,
    pub bias_x100: f64,
    pub rmse_x100: f64,
}

const COLUMNS: [BenchmarkMethod; 6] = BenchmarkMethod::STANDARD;

// (mechanism, outcome, bias row, rmse row), columns in `STANDARD` order.
const ROWS: [(Mechanism, OutcomeModel, [f64; 6], [f64; 6]); 6] = [
    (
        Mechanism::M1,
        OutcomeModel::Linear,
        [-13.21, -4.04, 1.05, 1.03, 1.13, 0.46],
        [21.38, 12.61, 14.80, 14.26, 12.71, 12.10],
    ),
    (
        Mechanism::M1,
        OutcomeModel::Nonlinear,
        [-9.89, -4.46, -0.36, -0.55, -0.33, -0.66],
        [15.59, 10.41, 12.52, 12.04, 11.46, 10.81],
    ),
    (
        Mechanism::M2,
        OutcomeModel::Linear,
        [-12.50, -3.55, 0.68, 0.70, 1.42, 1.58],
        [20.55, 12.95, 21.78, 15.12, 13.79, 14.23],
    ),
    (
        Mechanism::M2,
        OutcomeModel::Nonlinear,
        [-9.29, -4.00, -0.53, 0.26, 0.34, 0.28],
        [15.08, 10.53, 23.11, 12.90, 11.54, 11.64],
    ),
    (
        Mechanism::M3,
        OutcomeModel::Linear,
        [-14.64, -7.50, -3.60, -3.83, -2.48, -2.48],
        [21.97, 14.78, 16.94, 16.92, 13.33, 13.27],
    ),
    (
        Mechanism::M3,
        OutcomeModel::Nonlinear,
        [-10.29, -6.70, -3.68, -3.08, -2.92, -2.73],
        [15.90, 11.53, 12.06, 12.71, 10.34, 10.55],
    ),
];

pub fn lookup(mechanism: Mechanism, outcome: OutcomeModel, method: BenchmarkMethod) -> Option<Reference> {
    let col = COLUMNS.iter().position(|&m| m == method)?;
    ROWS.iter()
        .find(|r| r.0 == mechanism && r.1 == outcome)
        .map(|r| Reference {
            mechanism,
            outcome,
            method,
            bias_x100: r.2[col],
            rmse_x100: r.3[col],
        })
}

/// References apply only to the reference generator settings; the layout,
/// seed and `n` may differ.
pub fn applies_to(s: &SimScenario) -> bool {
    let d = SimScenario::new(s.mechanism, s.outcome_model);
    s.theta_uc == d.theta_uc
        && s.theta_c == d.theta_c
        && s.cross_corr == d.cross_corr
        && s.means == d.means
        && s.coefficients() == d.coefficients()
        && s.noise_sd == d.noise_sd
}

/// Magnitude class of a reference bias (×10²).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiasClass {
    /// |b| < 2: approximately unbiased.
    Small,
    /// 2 ≤ |b| < 6.
    Moderate,
    /// |b| ≥ 6.
    Large,
}

pub fn class(bias_x100: f64) -> BiasClass {
    match bias_x100.abs() {
        b if b < 2.0 => BiasClass::Small,
        b if b < 6.0 => BiasClass::Moderate,
        _ => BiasClass::Large,
    }
}

/// Closed band (×10²) for an observed bias given the reference one.
///
/// * small: |bias| < 4
/// * moderate: same sign or near zero, `|bias| < |b| + 4`
/// * large: same sign, `|bias|` within `[7, 20]`
pub fn band(bias_x100: f64) -> (f64, f64) {
    let s = bias_x100.signum();
    let m = bias_x100.abs();
    let (lo, hi) = match class(bias_x100) {
        BiasClass::Small => return (-4.0, 4.0),
        BiasClass::Moderate => (-2.0, m + 4.0),
        BiasClass::Large => (7.0, 20.0),
    };
    if s < 0.0 {
        (-hi, -lo)
    } else {
        (lo, hi)
    }
}
