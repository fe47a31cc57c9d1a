use spatial_iv::gpsim::{FrozenTruth, Simulator};
use spatial_iv::spatialdata::write_csv;

use super::{base_metadata, text, RunContext};
use crate::config::SimulateConfig;
use crate::output::{write_atomic, Table};
use crate::{ordered_map, CliError};

/// Writes one dataset CSV and one hidden-component table per replicate,
/// plus a manifest.
pub fn run(cfg: &SimulateConfig, ctx: &RunContext) -> Result<String, CliError> {
    if cfg.replicates == 0 {
        return Err(CliError::config("replicates must be at least 1"));
    }
    let sim = Simulator::new(cfg.scenario.clone())?;
    let mut meta = base_metadata("simulate");
    meta.extend(sim.metadata());

    let reps: Vec<usize> = (0..cfg.replicates).collect();
    let files = ordered_map(&reps, |&r| -> Result<(u64, String, String), CliError> {
        let draw = sim.draw(r)?;
        let mut m = meta.clone();
        m.push(("replicate".into(), text(r)));
        m.push(("replicate_seed".into(), text(draw.seed)));

        let data_name = format!("replicate_{r:04}.csv");
        let mut bytes = Vec::new();
        write_csv(&draw.dataset, &m, &mut bytes)?;
        write_atomic(&ctx.out.join(&data_name), &bytes)?;

        let mut t = Table::new(&format!("replicate_{r:04}_truth"), &["id", "a_uc", "a_c", "u"]);
        t.metadata = m;
        let h = &draw.truth;
        for i in 0..draw.dataset.n() {
            t.push(vec![
                draw.dataset.ids()[i].clone().into(),
                h.a_uc[i].into(),
                h.a_c[i].into(),
                h.u[i].into(),
            ]);
        }
        let truth = t.write(&ctx.out, ctx.format)?;
        let truth_name = truth.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        Ok((draw.seed, data_name, truth_name))
    });

    let mut manifest = Table::new("manifest", &["replicate", "seed", "dataset", "truth"]);
    manifest.metadata = meta;
    manifest.meta("replicates", cfg.replicates);
    if let Some(t) = FrozenTruth::lookup(&cfg.scenario, 0.5) {
        manifest.meta("truncated_effect_c0.5", t.value);
    }
    for (r, f) in files.into_iter().enumerate() {
        let (seed, data, truth) = f.map_err(|e| e.context(format!("replicate {r}")))?;
        manifest.push(vec![r.into(), seed.into(), data.into(), truth.into()]);
    }
    let path = manifest.write(&ctx.out, ctx.format)?;
    Ok(format!(
        "simulated {} replicate(s) of n = {}; manifest {}",
        cfg.replicates,
        sim.n(),
        path.display()
    ))
}
