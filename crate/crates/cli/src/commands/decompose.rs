use spatial_iv::basisdecomp::decompose;
use spatial_iv::numkernel::variance;

use super::{base_metadata, RunContext};
use crate::config::DecomposeConfig;
use crate::data::{build_basis, load_dataset};
use crate::output::Table;
use crate::CliError;

pub fn run(cfg: &DecomposeConfig, ctx: &RunContext) -> Result<String, CliError> {
    let table = decomposition_table(cfg)?;
    let share = table.metadata.iter().find(|(k, _)| k == "confounded_share").map(|(_, v)| v.clone());
    let dim = table.metadata.iter().find(|(k, _)| k == "basis_dim").map(|(_, v)| v.clone());
    let path = table.write(&ctx.out, ctx.format)?;
    Ok(format!(
        "basis dimension {}, Var(a_c)/Var(a) = {}; wrote {}",
        dim.unwrap_or_default(),
        share.unwrap_or_default(),
        path.display()
    ))
}

/// Columns `id, a, a_c, a_uc`.
pub fn decomposition_table(cfg: &DecomposeConfig) -> Result<Table, CliError> {
    let loaded = load_dataset(cfg.data.as_ref())?;
    let d = &loaded.dataset;
    let edges = cfg.data.as_ref().and_then(|c| c.edges.as_deref());
    let b = build_basis(d, edges, &cfg.basis)?;
    let dec = decompose(d.exposure(), &b.basis)?;
    if dec.zero_instrument {
        eprintln!("warning: the exposure lies in the basis span; the instrument has zero variance");
    }

    let mut t = Table::new("decomposition", &["id", "a", "a_c", "a_uc"]);
    t.metadata = base_metadata("decompose");
    t.meta("rows_dropped", loaded.dropped);
    t.metadata.extend(b.metadata());
    t.meta("basis_rank", dec.projection_rank);
    t.meta("confounded_share", variance(&dec.a_c) / variance(d.exposure()));
    t.meta("instrument_share", dec.instrument_share());
    t.meta("zero_instrument", dec.zero_instrument);
    for i in 0..d.n() {
        t.push(vec![
            d.ids()[i].clone().into(),
            d.exposure()[i].into(),
            dec.a_c[i].into(),
            dec.a_uc[i].into(),
        ]);
    }
    Ok(t)
}
