use spatial_iv::basisdecomp::{decompose, BasisKind};
use spatial_iv::dr_effects::{erc_grid, ErcConfig, GridSpec};

use super::{base_metadata, RunContext};
use crate::config::ErcRunConfig;
use crate::data::{build_basis, load_dataset};
use crate::output::{write_atomic, Table};
use crate::svg::{line_plot, Series};
use crate::{ordered_map, CliError};

pub fn run(cfg: &ErcRunConfig, ctx: &RunContext) -> Result<String, CliError> {
    let (curve, ratios) = erc_tables(cfg)?;
    let path = curve.write(&ctx.out, ctx.format)?;
    let mut msg = format!("{} curve row(s); wrote {}", curve.rows.len(), path.display());
    if cfg.svg {
        let svg = ctx.out.join("erc.svg");
        write_atomic(&svg, erc_svg(&curve).as_bytes())?;
        msg.push_str(&format!(", {}", svg.display()));
    }
    if let Some(r) = ratios {
        for row in &r.rows {
            if let (Some(m), Some(v)) = (row.first(), row.last()) {
                msg.push_str(&format!("\nrisk ratio {m}: {v}"));
            }
        }
        r.write(&ctx.out, ctx.format)?;
    }
    Ok(msg)
}

/// The curve table (`method, a, value, se, ci_lo, ci_hi, bandwidth`) and,
/// when requested, the risk-ratio table.
pub fn erc_tables(cfg: &ErcRunConfig) -> Result<(Table, Option<Table>), CliError> {
    if cfg.methods.is_empty() {
        return Err(CliError::config("`methods` is empty"));
    }
    let loaded = load_dataset(cfg.data.as_ref())?;
    let d = &loaded.dataset;
    let edges = cfg.data.as_ref().and_then(|c| c.edges.as_deref());
    let mut meta = base_metadata("erc");
    meta.push(("rows_dropped".into(), loaded.dropped.to_string()));
    let (a_c, kind) = if cfg.methods.iter().any(|m| m.needs_basis()) {
        let b = build_basis(d, edges, &cfg.basis)?;
        meta.extend(b.metadata());
        (Some(decompose(d.exposure(), &b.basis)?.a_c), b.kind)
    } else {
        (None, BasisKind::ThinPlateSpline)
    };

    let curve_for = |m: &crate::config::Adjustment, ec: &ErcConfig| {
        let a_c = if m.needs_basis() { a_c.as_deref() } else { None };
        erc_grid(d, m.set(), a_c, ec).map_err(|e| CliError::from(e).context(format!("method {}", m.name(kind))))
    };
    let curves = ordered_map(&cfg.methods, |m| curve_for(m, &cfg.erc));

    let mut t = Table::new("erc", &["method", "a", "value", "se", "ci_lo", "ci_hi", "bandwidth"]);
    t.metadata = meta.clone();
    for (m, c) in cfg.methods.iter().zip(curves) {
        for p in c? {
            t.push(vec![
                m.name(kind).into(),
                p.a.into(),
                p.value.into(),
                p.se.into(),
                p.ci_lo.into(),
                p.ci_hi.into(),
                p.bandwidth.into(),
            ]);
        }
    }

    let ratios = match cfg.risk_ratio {
        None => None,
        Some([num, den]) => {
            let ec = ErcConfig {
                grid: GridSpec::Points(vec![num, den]),
                ..cfg.erc.clone()
            };
            let pts = ordered_map(&cfg.methods, |m| curve_for(m, &ec));
            let mut r = Table::new("risk_ratio", &["method", "numerator", "denominator", "ratio"]);
            r.metadata = meta;
            for (m, p) in cfg.methods.iter().zip(pts) {
                let p = p?;
                r.push(vec![m.name(kind).into(), num.into(), den.into(), (p[0].value / p[1].value).into()]);
            }
            Some(r)
        }
    };
    Ok((t, ratios))
}

fn erc_svg(t: &Table) -> String {
    let col = |name: &str| t.col(name).expect("erc column");
    let (cm, ca, cv, cl, ch) = (col("method"), col("a"), col("value"), col("ci_lo"), col("ci_hi"));
    let num = |c: &crate::output::Cell| match c {
        crate::output::Cell::Num(v) => *v,
        _ => f64::NAN,
    };
    let mut series: Vec<Series> = Vec::new();
    for row in &t.rows {
        let label = match &row[cm] {
            crate::output::Cell::Text(s) => s.clone(),
            _ => String::new(),
        };
        if series.last().is_none_or(|s| s.label != label) {
            series.push(Series {
                label: label.clone(),
                points: Vec::new(),
            });
        }
        let s = series.last_mut().expect("just pushed");
        s.points.push((num(&row[ca]), num(&row[cv]), num(&row[cl]), num(&row[ch])));
    }
    line_plot("Exposure-response curve", "exposure a", "E[Y(a)]", &series)
}
