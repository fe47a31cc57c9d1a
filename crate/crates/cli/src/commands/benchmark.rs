use std::fmt::Write;

use spatial_iv::dr_effects::{BenchmarkMethod, MethodSuite};
use spatial_iv::gpsim::{run_replications, summarize, true_truncated_effect, FrozenTruth, MethodSummary, ReplicationTable, SimScenario, Simulator};

use super::{base_metadata, RunContext};
use crate::config::BenchmarkConfig;
use crate::output::Table;
use crate::reference::{self, Reference};
use crate::CliError;

/// Seed for on-demand truth oracles.
pub const ORACLE_SEED: u64 = 20_100;

#[derive(Clone, Debug)]
pub struct BenchmarkRow {
    pub method: BenchmarkMethod,
    pub summary: MethodSummary,
    pub reference: Option<Reference>,
    /// Band on `bias × 10²`.
    pub band: Option<(f64, f64)>,
}

impl BenchmarkRow {
    pub fn bias_x100(&self) -> f64 {
        100.0 * self.summary.bias
    }

    pub fn pass(&self) -> Option<bool> {
        self.band.map(|(lo, hi)| {
            let b = self.bias_x100();
            b >= lo && b <= hi && self.summary.succeeded > 0
        })
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub truth: f64,
    pub truth_source: String,
    pub rows: Vec<BenchmarkRow>,
    pub table: ReplicationTable,
    pub metadata: Vec<(String, String)>,
}

impl BenchmarkReport {
    pub fn row(&self, m: BenchmarkMethod) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == m)
    }

    pub fn failures(&self) -> Vec<&BenchmarkRow> {
        self.rows.iter().filter(|r| r.pass() == Some(false)).collect()
    }
}

fn truth(s: &SimScenario, c: f64, reps: usize) -> Result<(f64, String), CliError> {
    if let Some(t) = FrozenTruth::lookup(s, c) {
        return Ok((t.value, format!("frozen oracle ({} reps, seed {}, se {:.2e})", t.reps, t.seed, t.se)));
    }
    let o = SimScenario {
        seed: ORACLE_SEED,
        ..s.clone()
    };
    let t = true_truncated_effect(&o, c, reps)?;
    Ok((t.value, format!("oracle ({} reps, seed {ORACLE_SEED}, se {:.2e})", t.reps, t.se)))
}

/// Runs every configured method over the replicates and compares with the
/// embedded references.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport, CliError> {
    if cfg.replicates == 0 {
        return Err(CliError::config("replicates must be at least 1"));
    }
    if cfg.suite.methods.is_empty() {
        return Err(CliError::config("suite.methods is empty"));
    }
    let sim = Simulator::new(cfg.scenario.clone())?;
    let (truth, truth_source) = truth(&cfg.scenario, cfg.suite.c, cfg.truth_reps)?;
    let suite = MethodSuite::new(&sim.layout().coords, cfg.suite.clone())?;
    let table = run_replications(&sim, cfg.replicates, &suite);
    let with_refs = cfg.check_bands && reference::applies_to(&cfg.scenario) && cfg.suite.c == 0.5;

    let rows = cfg
        .suite
        .methods
        .iter()
        .zip(summarize(&table, truth))
        .map(|(&method, summary)| {
            let reference = with_refs
                .then(|| reference::lookup(cfg.scenario.mechanism, cfg.scenario.outcome_model, method))
                .flatten();
            BenchmarkRow {
                method,
                summary,
                band: reference.map(|r| reference::band(r.bias_x100)),
                reference,
            }
        })
        .collect();

    let mut metadata = base_metadata("benchmark");
    metadata.extend(sim.metadata());
    metadata.push(("replicates".into(), cfg.replicates.to_string()));
    metadata.push(("cutoff".into(), cfg.suite.c.to_string()));
    metadata.push(("basis_dim".into(), cfg.suite.basis_dim(sim.n()).to_string()));
    metadata.push(("truth".into(), truth.to_string()));
    metadata.push(("truth_source".into(), truth_source.clone()));
    metadata.push(("scale".into(), "bias, rmse and bands multiplied by 100".into()));
    Ok(BenchmarkReport {
        truth,
        truth_source,
        rows,
        table,
        metadata,
    })
}

pub fn replicate_table(r: &BenchmarkReport) -> Table {
    let mut t = Table::new(
        "benchmark_replicates",
        &["replicate", "seed", "method", "psi", "ci_lo", "ci_hi", "error"],
    );
    t.metadata = r.metadata.clone();
    for row in &r.table.rows {
        let e = row.estimate;
        t.push(vec![
            row.replicate.into(),
            row.seed.into(),
            row.method.clone().into(),
            e.map(|e| e.value).into(),
            e.and_then(|e| e.ci).map(|c| c.0).into(),
            e.and_then(|e| e.ci).map(|c| c.1).into(),
            row.error.clone().into(),
        ]);
    }
    t
}

pub fn summary_table(r: &BenchmarkReport) -> Table {
    let mut t = Table::new(
        "benchmark_summary",
        &[
            "method",
            "succeeded",
            "failed",
            "mean",
            "bias_x100",
            "rmse_x100",
            "bias_se_x100",
            "coverage",
            "ref_bias_x100",
            "ref_rmse_x100",
            "band_lo_x100",
            "band_hi_x100",
            "pass",
        ],
    );
    t.metadata = r.metadata.clone();
    for row in &r.rows {
        let s = &row.summary;
        t.push(vec![
            s.method.clone().into(),
            s.succeeded.into(),
            s.failed.into(),
            s.mean.into(),
            (100.0 * s.bias).into(),
            (100.0 * s.rmse).into(),
            (100.0 * s.bias_se).into(),
            s.coverage.into(),
            row.reference.map(|x| x.bias_x100).into(),
            row.reference.map(|x| x.rmse_x100).into(),
            row.band.map(|b| b.0).into(),
            row.band.map(|b| b.1).into(),
            row.pass().into(),
        ]);
    }
    t
}

/// Fixed-width table for the terminal.
pub fn render(r: &BenchmarkReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "truth {:.6} ({})", r.truth, r.truth_source);
    let _ = writeln!(
        s,
        "{:<32} {:>4} {:>9} {:>9} {:>9} {:>9} {:>17}  status",
        "method", "ok", "bias", "rmse", "ref bias", "ref rmse", "band"
    );
    for row in &r.rows {
        let sm = &row.summary;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let band = row.band.map_or("-".to_string(), |(a, b)| format!("[{a:.2}, {b:.2}]"));
        let status = match row.pass() {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(
            s,
            "{:<32} {:>4} {:>9.2} {:>9.2} {:>9} {:>9} {:>17}  {}",
            sm.method,
            sm.succeeded,
            100.0 * sm.bias,
            100.0 * sm.rmse,
            opt(row.reference.map(|x| x.bias_x100)),
            opt(row.reference.map(|x| x.rmse_x100)),
            band,
            status
        );
    }
    let _ = write!(s, "(bias and RMSE ×10²)");
    s
}

pub fn run(cfg: &BenchmarkConfig, ctx: &RunContext) -> Result<String, CliError> {
    let report = run_benchmark(cfg)?;
    replicate_table(&report).write(&ctx.out, ctx.format)?;
    summary_table(&report).write(&ctx.out, ctx.format)?;
    let text = render(&report);
    let failed = report.failures();
    if failed.is_empty() {
        Ok(text)
    } else {
        println!("{text}");
        let names: Vec<&str> = failed.iter().map(|r| r.summary.method.as_str()).collect();
        Err(CliError::BandFailure(names.join(", ")))
    }
}
