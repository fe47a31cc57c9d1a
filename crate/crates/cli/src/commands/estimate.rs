use spatial_iv::basisdecomp::{decompose, BasisKind};
use spatial_iv::dr_effects::{truncated_effect, DrError};
use spatial_iv::linear_iv::fit;

use super::{base_metadata, RunContext};
use crate::config::{Adjustment, EstimateConfig, Model};
use crate::data::{build_basis, load_dataset};
use crate::output::Table;
use crate::{ordered_map, CliError};

pub const DR_COLUMNS: [&str; 9] = [
    "cutoff",
    "method",
    "psi",
    "ci_lo",
    "ci_hi",
    "se",
    "bandwidth",
    "clamped_count",
    "min_density",
];

pub fn run(cfg: &EstimateConfig, ctx: &RunContext) -> Result<String, CliError> {
    let t = estimate_table(cfg)?;
    let rows = t.rows.len();
    let path = t.write(&ctx.out, ctx.format)?;
    Ok(format!("{rows} estimate row(s); wrote {}", path.display()))
}

pub fn estimate_table(cfg: &EstimateConfig) -> Result<Table, CliError> {
    let loaded = load_dataset(cfg.data.as_ref())?;
    let d = &loaded.dataset;
    let edges = cfg.data.as_ref().and_then(|c| c.edges.as_deref());
    let mut meta = base_metadata("estimate");
    meta.push(("rows_dropped".into(), loaded.dropped.to_string()));

    match cfg.model {
        Model::Linear => {
            let y = d.outcome().ok_or(DrError::MissingOutcome)?;
            let b = build_basis(d, edges, &cfg.basis)?;
            let f = fit(cfg.strategy, y, d.exposure(), &b.basis)?;
            let mut t = Table::new(
                "estimate",
                &["beta", "intercept", "strategy", "instrument_variance_share"],
            );
            t.metadata = meta;
            t.metadata.extend(b.metadata());
            t.push(vec![
                f.beta.into(),
                f.intercept.into(),
                f.strategy.name().into(),
                f.instrument_variance_share.into(),
            ]);
            Ok(t)
        }
        Model::Dr => {
            if cfg.cutoffs.is_empty() {
                return Err(CliError::config("the dr model needs at least one entry in `cutoffs`"));
            }
            if cfg.methods.is_empty() {
                return Err(CliError::config("`methods` is empty"));
            }
            let mut t = Table::new("estimate", &DR_COLUMNS);
            t.metadata = meta;
            let (a_c, kind) = if cfg.methods.iter().any(|m| m.needs_basis()) {
                let b = build_basis(d, edges, &cfg.basis)?;
                t.metadata.extend(b.metadata());
                (Some(decompose(d.exposure(), &b.basis)?.a_c), b.kind)
            } else {
                (None, BasisKind::ThinPlateSpline)
            };
            let tasks: Vec<(f64, Adjustment)> = cfg
                .cutoffs
                .iter()
                .flat_map(|&c| cfg.methods.iter().map(move |&m| (c, m)))
                .collect();
            let results = ordered_map(&tasks, |&(c, m)| {
                let a_c = if m.needs_basis() { a_c.as_deref() } else { None };
                truncated_effect(d, m.set(), a_c, c, &cfg.effect)
            });
            for (&(c, m), r) in tasks.iter().zip(results) {
                let e = r.map_err(|e| CliError::from(e).context(format!("cutoff {c}, method {}", m.name(kind))))?;
                t.push(vec![
                    c.into(),
                    m.name(kind).into(),
                    e.psi.into(),
                    e.ci.0.into(),
                    e.ci.1.into(),
                    e.se.into(),
                    e.bandwidth.into(),
                    e.clamped_count.into(),
                    e.min_density.into(),
                ]);
            }
            Ok(t)
        }
    }
}
