use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spatial_iv::basisdecomp::BasisKind;
use spatial_iv::dr_effects::{AdjustmentSet, ErcConfig, SuiteConfig, TruncatedEffectConfig};
use spatial_iv::gpsim::SimScenario;
use spatial_iv::linear_iv::IvStrategy;
use spatial_iv::spatialdata::{CsvSchema, DEFAULT_KNN};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A dataset file and how its columns map onto the dataset fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub schema: CsvSchema,
    /// Adjacency edge list for graph bases; a kNN graph is used otherwise.
    #[serde(default)]
    pub edges: Option<PathBuf>,
}

impl DataConfig {
    pub fn at(path: PathBuf) -> Self {
        Self {
            path,
            schema: CsvSchema::default(),
            edges: None,
        }
    }
}

/// Basis family plus either a fixed dimension or a target share of
/// exposure variance. With neither, the dimension is `⌊0.07·n⌋`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub kind: BasisKind,
    pub dim: Option<usize>,
    pub variance_target: Option<f64>,
    /// Largest dimension tried when searching for `variance_target`.
    pub max_dim: Option<usize>,
    pub knn: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            kind: BasisKind::ThinPlateSpline,
            dim: None,
            variance_target: None,
            max_dim: None,
            knn: DEFAULT_KNN,
        }
    }
}

pub fn basis_label(kind: BasisKind) -> &'static str {
    match kind {
        BasisKind::ThinPlateSpline => "TPS",
        BasisKind::LaplacianEigen => "GraphLaplacian",
        BasisKind::PrecisionEigen => "Precision",
        BasisKind::RegionIndicator => "Region",
    }
}

/// Adjustment approach for analyses of a single dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    Baseline,
    Spatialcoord,
    Iv,
    IvSpatialcoord,
}

impl Adjustment {
    pub const ALL: [Adjustment; 4] = [Self::Baseline, Self::Spatialcoord, Self::Iv, Self::IvSpatialcoord];

    pub fn set(self) -> AdjustmentSet {
        match self {
            Self::Baseline => AdjustmentSet::None,
            Self::Spatialcoord => AdjustmentSet::SpatialCoords,
            Self::Iv => AdjustmentSet::AC,
            Self::IvSpatialcoord => AdjustmentSet::ACSpatialCoords,
        }
    }

    pub fn needs_basis(self) -> bool {
        self.set().needs_a_c()
    }

    pub fn name(self, kind: BasisKind) -> String {
        match self {
            Self::Baseline => "baseline".into(),
            Self::Spatialcoord => "spatialcoord".into(),
            Self::Iv => format!("IV-{}", basis_label(kind)),
            Self::IvSpatialcoord => format!("IV-{}+spatialcoord", basis_label(kind)),
        }
    }
}

/// Implemented by every command configuration.
pub trait CommandConfig: Serialize + DeserializeOwned + Default + Sync {
    fn schema_version(&self) -> u32;

    /// `--seed` override.
    fn apply_seed(&mut self, seed: u64);

    /// `--data` override; commands without a dataset reject it.
    fn apply_data(&mut self, path: PathBuf) -> Result<(), CliError> {
        let _ = path;
        Err(CliError::config("this command does not read a dataset"))
    }
}

/// Reads `path` (or the defaults when absent). Unknown keys and a missing or
/// unsupported `schema_version` are errors.
pub fn load<T: CommandConfig>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let cfg: T = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if cfg.schema_version() != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            cfg.schema_version()
        )));
    }
    Ok(cfg)
}

fn one() -> u32 {
    SCHEMA_VERSION
}

fn default_replicates_sim() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: SimScenario,
    #[serde(default = "default_replicates_sim")]
    pub replicates: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            schema_version: one(),
            scenario: SimScenario::default(),
            replicates: default_replicates_sim(),
        }
    }
}

impl CommandConfig for SimulateConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
    fn apply_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            schema_version: one(),
            data: None,
            basis: BasisConfig::default(),
        }
    }
}

impl CommandConfig for DecomposeConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
    fn apply_seed(&mut self, _seed: u64) {}
    fn apply_data(&mut self, path: PathBuf) -> Result<(), CliError> {
        set_path(&mut self.data, path);
        Ok(())
    }
}

fn set_path(data: &mut Option<DataConfig>, path: PathBuf) {
    match data {
        Some(d) => d.path = path,
        None => *data = Some(DataConfig::at(path)),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Constant-effect linear IV fit.
    Linear,
    /// Doubly robust truncated exposure effect.
    #[default]
    Dr,
}

fn default_strategy() -> IvStrategy {
    IvStrategy::TwoSls
}

fn default_methods() -> Vec<Adjustment> {
    Adjustment::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub model: Model,
    #[serde(default = "default_strategy")]
    pub strategy: IvStrategy,
    #[serde(default = "default_methods")]
    pub methods: Vec<Adjustment>,
    /// Required for the doubly robust model.
    #[serde(default)]
    pub cutoffs: Vec<f64>,
    #[serde(default)]
    pub effect: TruncatedEffectConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            schema_version: one(),
            data: None,
            basis: BasisConfig::default(),
            model: Model::default(),
            strategy: default_strategy(),
            methods: default_methods(),
            cutoffs: Vec::new(),
            effect: TruncatedEffectConfig::default(),
        }
    }
}

impl CommandConfig for EstimateConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
    fn apply_seed(&mut self, seed: u64) {
        self.effect.nuisance.fold_seed = seed;
    }
    fn apply_data(&mut self, path: PathBuf) -> Result<(), CliError> {
        set_path(&mut self.data, path);
        Ok(())
    }
}

fn default_erc_methods() -> Vec<Adjustment> {
    vec![Adjustment::Baseline]
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErcRunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default = "default_erc_methods")]
    pub methods: Vec<Adjustment>,
    #[serde(default)]
    pub erc: ErcConfig,
    /// `[numerator, denominator]` exposure levels for a causal risk ratio.
    #[serde(default)]
    pub risk_ratio: Option<[f64; 2]>,
    #[serde(default = "yes")]
    pub svg: bool,
}

impl Default for ErcRunConfig {
    fn default() -> Self {
        Self {
            schema_version: one(),
            data: None,
            basis: BasisConfig::default(),
            methods: default_erc_methods(),
            erc: ErcConfig::default(),
            risk_ratio: None,
            svg: true,
        }
    }
}

impl CommandConfig for ErcRunConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
    fn apply_seed(&mut self, seed: u64) {
        self.erc.nuisance.fold_seed = seed;
    }
    fn apply_data(&mut self, path: PathBuf) -> Result<(), CliError> {
        set_path(&mut self.data, path);
        Ok(())
    }
}

fn default_dims() -> Vec<usize> {
    (4..=8).collect()
}

fn default_cutoff() -> f64 {
    0.5
}

fn three() -> usize {
    3
}

fn default_kind() -> BasisKind {
    BasisKind::ThinPlateSpline
}

fn default_knn() -> usize {
    DEFAULT_KNN
}

/// Re-estimates one cutoff over a list of basis dimensions. Uses `data` when
/// given, otherwise replicate 0 of `scenario`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub scenario: SimScenario,
    #[serde(default = "default_kind")]
    pub kind: BasisKind,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Also adjust for the coordinates.
    #[serde(default)]
    pub spatialcoord: bool,
    /// Smallest graph-Laplacian dimension accepted.
    #[serde(default = "three")]
    pub laplacian_min_dim: usize,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default)]
    pub effect: TruncatedEffectConfig,
    #[serde(default = "yes")]
    pub svg: bool,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            schema_version: one(),
            data: None,
            scenario: SimScenario::default(),
            kind: default_kind(),
            dims: default_dims(),
            cutoff: default_cutoff(),
            spatialcoord: false,
            laplacian_min_dim: three(),
            knn: DEFAULT_KNN,
            effect: TruncatedEffectConfig::default(),
            svg: true,
        }
    }
}

impl CommandConfig for SensitivityConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
    fn apply_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
    }
    fn apply_data(&mut self, path: PathBuf) -> Result<(), CliError> {
        set_path(&mut self.data, path);
        Ok(())
    }
}

fn default_replicates_bench() -> usize {
    100
}

fn default_truth_reps() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: SimScenario,
    #[serde(default = "default_replicates_bench")]
    pub replicates: usize,
    #[serde(default)]
    pub suite: SuiteConfig,
    /// Oracle replicates when no frozen truth matches the scenario.
    #[serde(default = "default_truth_reps")]
    pub truth_reps: usize,
    /// Compare against the embedded reference table.
    #[serde(default = "yes")]
    pub check_bands: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            schema_version: one(),
            scenario: SimScenario::default(),
            replicates: default_replicates_bench(),
            suite: SuiteConfig::default(),
            truth_reps: default_truth_reps(),
            check_bands: true,
        }
    }
}

impl CommandConfig for BenchmarkConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
    fn apply_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse<T: CommandConfig>(s: &str) -> Result<T, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, s).unwrap();
        load(Some(&p))
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse::<BenchmarkConfig>(r#"{"schema_version": 1, "replicatez": 3}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = parse::<BenchmarkConfig>(r#"{"schema_version": 1, "suite": {"cc": 1}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn schema_version_is_required_and_checked() {
        assert!(parse::<SimulateConfig>("{}").is_err());
        assert!(parse::<SimulateConfig>(r#"{"schema_version": 2}"#).is_err());
        let c = parse::<SimulateConfig>(r#"{"schema_version": 1, "replicates": 2}"#).unwrap();
        assert_eq!(c.replicates, 2);
        assert_eq!(c.scenario.n, 503);
    }

    #[test]
    fn defaults_round_trip() {
        let c = BenchmarkConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: BenchmarkConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let e = ErcRunConfig::default();
        let back: ErcRunConfig = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn method_names() {
        assert_eq!(Adjustment::IvSpatialcoord.name(BasisKind::LaplacianEigen), "IV-GraphLaplacian+spatialcoord");
        assert_eq!(Adjustment::Iv.name(BasisKind::ThinPlateSpline), "IV-TPS");
    }
}
