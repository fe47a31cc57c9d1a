use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::nuisance::AdjustmentSet;
use super::{truncated_effect, DrError, TruncatedEffectConfig};
use crate::basisdecomp::{decompose, eigen_basis, tps_basis, EigenEnd, SpatialBasis};
use crate::gpsim::{Estimate, ReplicateEstimator, SimDraw};
use crate::spatialdata::{graph_laplacian, knn_graph, SpatialDataset, DEFAULT_KNN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkMethod {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "spatialcoord")]
    SpatialCoord,
    #[serde(rename = "IV-TPS")]
    IvTps,
    #[serde(rename = "IV-GraphLaplacian")]
    IvGraphLaplacian,
    #[serde(rename = "IV-TPS+spatialcoord")]
    IvTpsCoord,
    #[serde(rename = "IV-GraphLaplacian+spatialcoord")]
    IvGraphLaplacianCoord,
    /// Adjusts for the simulated confounded component itself.
    #[serde(rename = "oracle-A_C")]
    OracleAC,
}

impl BenchmarkMethod {
    pub const STANDARD: [BenchmarkMethod; 6] = [
        Self::Baseline,
        Self::SpatialCoord,
        Self::IvTps,
        Self::IvGraphLaplacian,
        Self::IvTpsCoord,
        Self::IvGraphLaplacianCoord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::SpatialCoord => "spatialcoord",
            Self::IvTps => "IV-TPS",
            Self::IvGraphLaplacian => "IV-GraphLaplacian",
            Self::IvTpsCoord => "IV-TPS+spatialcoord",
            Self::IvGraphLaplacianCoord => "IV-GraphLaplacian+spatialcoord",
            Self::OracleAC => "oracle-A_C",
        }
    }

    pub fn adjustment(self) -> AdjustmentSet {
        match self {
            Self::Baseline => AdjustmentSet::None,
            Self::SpatialCoord => AdjustmentSet::SpatialCoords,
            Self::IvTps | Self::IvGraphLaplacian | Self::OracleAC => AdjustmentSet::AC,
            Self::IvTpsCoord | Self::IvGraphLaplacianCoord => AdjustmentSet::ACSpatialCoords,
        }
    }

    pub fn is_iv(self) -> bool {
        matches!(
            self,
            Self::IvTps | Self::IvGraphLaplacian | Self::IvTpsCoord | Self::IvGraphLaplacianCoord
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub methods: Vec<BenchmarkMethod>,
    pub c: f64,
    /// Basis dimension as a fraction of `n`, rounded down.
    pub basis_fraction: f64,
    pub knn: usize,
    pub effect: TruncatedEffectConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            methods: BenchmarkMethod::STANDARD.to_vec(),
            c: 0.5,
            basis_fraction: 0.07,
            knn: DEFAULT_KNN,
            effect: TruncatedEffectConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn basis_dim(&self, n: usize) -> usize {
        (self.basis_fraction * n as f64).floor() as usize
    }
}

/// The benchmark estimators for one fixed layout. Bases depend only on the
/// coordinates and are built once.
#[derive(Clone, Debug)]
pub struct MethodSuite {
    config: SuiteConfig,
    tps: Option<Arc<SpatialBasis>>,
    laplacian: Option<Arc<SpatialBasis>>,
}

impl MethodSuite {
    pub fn new(coords: &[[f64; 2]], config: SuiteConfig) -> Result<Self, DrError> {
        let bad = |e: &dyn std::fmt::Display| DrError::InvalidConfig(format!("benchmark basis: {e}"));
        let n = coords.len();
        let m = config.basis_dim(n);
        let d = SpatialDataset::new(coords.to_vec(), vec![0.0; n]).map_err(|e| bad(&e))?;
        let want = |pred: fn(BenchmarkMethod) -> bool| config.methods.iter().any(|&x| pred(x));
        let tps = if want(|x| matches!(x, BenchmarkMethod::IvTps | BenchmarkMethod::IvTpsCoord)) {
            Some(Arc::new(tps_basis(&d, m).map_err(|e| bad(&e))?))
        } else {
            None
        };
        let laplacian = if want(|x| matches!(x, BenchmarkMethod::IvGraphLaplacian | BenchmarkMethod::IvGraphLaplacianCoord)) {
            let g = knn_graph(&d, config.knn).map_err(|e| bad(&e))?;
            Some(Arc::new(
                eigen_basis(&graph_laplacian(&g), m, EigenEnd::Smoothest).map_err(|e| bad(&e))?,
            ))
        } else {
            None
        };
        Ok(Self { config, tps, laplacian })
    }

    pub fn config(&self) -> &SuiteConfig {
        &self.config
    }

    fn a_c(&self, method: BenchmarkMethod, draw: &SimDraw) -> Result<Option<Vec<f64>>, String> {
        let basis = match method {
            BenchmarkMethod::IvTps | BenchmarkMethod::IvTpsCoord => &self.tps,
            BenchmarkMethod::IvGraphLaplacian | BenchmarkMethod::IvGraphLaplacianCoord => &self.laplacian,
            BenchmarkMethod::OracleAC => return Ok(Some(draw.truth.a_c.clone())),
            _ => return Ok(None),
        };
        let b = basis.as_ref().expect("basis built for every requested method");
        decompose(draw.dataset.exposure(), b)
            .map(|dec| Some(dec.a_c))
            .map_err(|e| e.to_string())
    }

    /// Runs one method on a dataset with a known exposure decomposition.
    pub fn run(&self, method: BenchmarkMethod, draw: &SimDraw) -> Result<Estimate, String> {
        let a_c = self.a_c(method, draw)?;
        truncated_effect(
            &draw.dataset,
            method.adjustment(),
            a_c.as_deref(),
            self.config.c,
            &self.config.effect,
        )
        .map(|e| Estimate {
            value: e.psi,
            ci: Some(e.ci),
        })
        .map_err(|e: DrError| e.to_string())
    }
}

impl ReplicateEstimator for MethodSuite {
    fn methods(&self) -> Vec<String> {
        self.config.methods.iter().map(|m| m.name().to_string()).collect()
    }

    fn estimate(&self, draw: &SimDraw) -> Vec<Result<Estimate, String>> {
        self.config.methods.iter().map(|&m| self.run(m, draw)).collect()
    }
}
