use std::path::Path;
use std::sync::Arc;

use spatial_iv::basisdecomp::{
    eigen_basis_from, eigen_dimension_for_target, region_basis, tps_basis, tps_dimension_for_target, BasisKind,
    EigenEnd, SpatialBasis,
};
use spatial_iv::numkernel::{sym_eigen, variance};
use spatial_iv::spatialdata::{graph_laplacian, knn_graph, load_csv, load_edge_list, LoadedDataset, SpatialDataset};

use crate::config::{basis_label, BasisConfig, DataConfig};
use crate::CliError;

pub fn load_dataset(cfg: Option<&DataConfig>) -> Result<LoadedDataset, CliError> {
    let cfg = cfg.ok_or_else(|| CliError::config("no dataset: pass --data or set `data.path` in the config"))?;
    load_csv(&cfg.path, &cfg.schema).map_err(|e| CliError::from(e).context(cfg.path.display()))
}

#[derive(Clone, Debug)]
pub struct BuiltBasis {
    pub basis: Arc<SpatialBasis>,
    pub kind: BasisKind,
    pub dim: usize,
    /// `Var(a_c) / Var(a)` at the chosen dimension when a target was used.
    pub target_share: Option<f64>,
    pub graph: Option<String>,
}

impl BuiltBasis {
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut m = vec![
            ("basis".to_string(), basis_label(self.kind).to_string()),
            ("basis_dim".to_string(), self.dim.to_string()),
        ];
        if let Some(g) = &self.graph {
            m.push(("graph".into(), g.clone()));
        }
        if let Some(s) = self.target_share {
            m.push(("basis_variance_share".into(), s.to_string()));
        }
        m
    }
}

/// `⌊0.07·n⌋`.
pub fn default_dim(n: usize) -> usize {
    (0.07 * n as f64).floor() as usize
}

pub fn build_basis(d: &SpatialDataset, edges: Option<&Path>, cfg: &BasisConfig) -> Result<BuiltBasis, CliError> {
    if cfg.dim.is_some() && cfg.variance_target.is_some() {
        return Err(CliError::config("basis: set either `dim` or `variance_target`, not both"));
    }
    let n = d.n();
    let a = d.exposure();
    if variance(a).partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::data("exposure is constant"));
    }
    match cfg.kind {
        BasisKind::ThinPlateSpline => {
            let (dim, target_share) = match cfg.variance_target {
                Some(t) => {
                    let hi = cfg.max_dim.unwrap_or(50).min(n);
                    let c = tps_dimension_for_target(d, a, t, 4..=hi)?;
                    (c.dim, Some(c.share))
                }
                None => (cfg.dim.unwrap_or_else(|| default_dim(n)), None),
            };
            Ok(BuiltBasis {
                basis: Arc::new(tps_basis(d, dim)?),
                kind: cfg.kind,
                dim,
                target_share,
                graph: None,
            })
        }
        BasisKind::LaplacianEigen | BasisKind::PrecisionEigen => {
            let (g, graph) = match edges {
                Some(p) => (
                    load_edge_list(p, d).map_err(|e| CliError::from(e).context(p.display()))?,
                    format!("edge list {}", p.display()),
                ),
                None => (knn_graph(d, cfg.knn)?, format!("knn k={}", cfg.knn)),
            };
            let e = sym_eigen(&graph_laplacian(&g)).map_err(|e| CliError::data(format!("eigensolver: {e}")))?;
            let (dim, target_share) = match cfg.variance_target {
                Some(t) => {
                    let hi = cfg.max_dim.unwrap_or(n / 2).clamp(1, n);
                    let c = eigen_dimension_for_target(&e, a, t, EigenEnd::Smoothest, 1..=hi)?;
                    (c.dim, Some(c.share))
                }
                None => (cfg.dim.unwrap_or_else(|| default_dim(n)), None),
            };
            Ok(BuiltBasis {
                basis: Arc::new(eigen_basis_from(&e, dim, EigenEnd::Smoothest, cfg.kind)?),
                kind: cfg.kind,
                dim,
                target_share,
                graph: Some(graph),
            })
        }
        BasisKind::RegionIndicator => {
            if cfg.dim.is_some() || cfg.variance_target.is_some() {
                return Err(CliError::config("basis: region indicators take no `dim` or `variance_target`"));
            }
            let b = region_basis(d)?;
            Ok(BuiltBasis {
                dim: b.dim(),
                basis: Arc::new(b),
                kind: cfg.kind,
                target_share: None,
                graph: None,
            })
        }
    }
}
