use std::sync::Arc;

use spatial_iv::basisdecomp::{decompose, eigen_basis_from, tps_basis, BasisKind, EigenEnd, SpatialBasis};
use spatial_iv::dr_effects::{truncated_effect, AdjustmentSet};
use spatial_iv::gpsim::Simulator;
use spatial_iv::numkernel::{sym_eigen, variance, EigenDecomposition};
use spatial_iv::spatialdata::{graph_laplacian, knn_graph, load_edge_list, SpatialDataset};

use super::{base_metadata, RunContext};
use crate::config::{basis_label, SensitivityConfig};
use crate::data::load_dataset;
use crate::output::{write_atomic, Table};
use crate::svg::whisker_plot;
use crate::{ordered_map, CliError};

pub fn run(cfg: &SensitivityConfig, ctx: &RunContext) -> Result<String, CliError> {
    let t = sensitivity_table(cfg)?;
    let path = t.write(&ctx.out, ctx.format)?;
    let mut msg = format!("{} dimension(s); wrote {}", t.rows.len(), path.display());
    if cfg.svg {
        let pts: Vec<(f64, f64, f64, f64)> = t
            .rows
            .iter()
            .map(|r| {
                let v = |k: usize| match &r[k] {
                    crate::output::Cell::Num(x) => *x,
                    crate::output::Cell::Int(x) => *x as f64,
                    _ => f64::NAN,
                };
                (v(0), v(1), v(2), v(3))
            })
            .collect();
        let title = format!("Truncated effect at c = {} by {} dimension", cfg.cutoff, basis_label(cfg.kind));
        let svg = ctx.out.join("sensitivity.svg");
        write_atomic(&svg, whisker_plot(&title, "basis dimension", "psi", &pts).as_bytes())?;
        msg.push_str(&format!(", {}", svg.display()));
    }
    Ok(msg)
}

/// Eigenvalues below this (relative to the largest) count as zero.
const ZERO_EIGEN_TOL: f64 = 1e-9;

enum Family {
    Tps,
    Eigen(EigenDecomposition),
}

fn dataset(cfg: &SensitivityConfig) -> Result<(SpatialDataset, Vec<(String, String)>), CliError> {
    let mut meta = base_metadata("sensitivity");
    if cfg.data.is_some() {
        let loaded = load_dataset(cfg.data.as_ref())?;
        meta.push(("rows_dropped".into(), loaded.dropped.to_string()));
        Ok((loaded.dataset, meta))
    } else {
        let sim = Simulator::new(cfg.scenario.clone())?;
        meta.extend(sim.metadata());
        meta.push(("replicate".into(), "0".into()));
        Ok((sim.draw(0)?.dataset, meta))
    }
}

/// Columns `dim, psi, ci_lo, ci_hi, se, confounded_share`.
pub fn sensitivity_table(cfg: &SensitivityConfig) -> Result<Table, CliError> {
    if cfg.dims.is_empty() {
        return Err(CliError::config("`dims` is empty"));
    }
    let (d, mut meta) = dataset(cfg)?;
    let family = match cfg.kind {
        BasisKind::ThinPlateSpline => Family::Tps,
        BasisKind::LaplacianEigen | BasisKind::PrecisionEigen => {
            let edges = cfg.data.as_ref().and_then(|c| c.edges.as_deref());
            let g = match edges {
                Some(p) => load_edge_list(p, &d).map_err(|e| CliError::from(e).context(p.display()))?,
                None => knn_graph(&d, cfg.knn)?,
            };
            let e = sym_eigen(&graph_laplacian(&g)).map_err(|e| CliError::data(format!("eigensolver: {e}")))?;
            let top = e.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let zeros = e.eigenvalues.iter().filter(|v| v.abs() <= ZERO_EIGEN_TOL * top.max(1.0)).count();
            meta.push(("zero_eigenvalues".into(), zeros.to_string()));
            for &m in &cfg.dims {
                if m < cfg.laplacian_min_dim || (zeros >= 2 && m <= zeros) {
                    return Err(CliError::config(format!(
                        "Laplacian dimension {m} rejected: dimensions start at {}; the graph Laplacian has {zeros} zero \
                         eigenvalue(s), whose eigenvectors only span connected-component indicators",
                        cfg.laplacian_min_dim.max(if zeros >= 2 { zeros + 1 } else { 0 })
                    )));
                }
            }
            Family::Eigen(e)
        }
        BasisKind::RegionIndicator => {
            return Err(CliError::config("sensitivity needs a thin_plate_spline or eigen basis kind"))
        }
    };
    meta.push(("basis".into(), basis_label(cfg.kind).into()));
    meta.push(("cutoff".into(), cfg.cutoff.to_string()));
    meta.push(("spatialcoord".into(), cfg.spatialcoord.to_string()));

    let adjust = if cfg.spatialcoord {
        AdjustmentSet::ACSpatialCoords
    } else {
        AdjustmentSet::AC
    };
    let va = variance(d.exposure());
    let rows = ordered_map(&cfg.dims, |&m| -> Result<[f64; 5], CliError> {
        let b: SpatialBasis = match &family {
            Family::Tps => tps_basis(&d, m)?,
            Family::Eigen(e) => eigen_basis_from(e, m, EigenEnd::Smoothest, cfg.kind)?,
        };
        let dec = decompose(d.exposure(), &Arc::new(b))?;
        let e = truncated_effect(&d, adjust, Some(&dec.a_c), cfg.cutoff, &cfg.effect)?;
        Ok([e.psi, e.ci.0, e.ci.1, e.se, variance(&dec.a_c) / va])
    });

    let mut t = Table::new("sensitivity", &["dim", "psi", "ci_lo", "ci_hi", "se", "confounded_share"]);
    t.metadata = meta;
    for (&m, r) in cfg.dims.iter().zip(rows) {
        let r = r.map_err(|e| e.context(format!("dimension {m}")))?;
        let mut row = vec![m.into()];
        row.extend(r.iter().map(|&v| v.into()));
        t.push(row);
    }
    Ok(t)
}
