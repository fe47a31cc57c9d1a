use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spatial_iv::linear_iv::IvStrategy;
use spatial_iv_cli::commands::{self, RunContext, RESOLVED_CONFIG};
use spatial_iv_cli::config::{self, CommandConfig, Model};
use spatial_iv_cli::output::{write_json, Format};
use spatial_iv_cli::CliError;

#[derive(Parser)]
#[command(name = "spatial-iv", version, about = "Spatial instrumental-variable analyses and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// JSON config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate datasets from a Gaussian-process scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Split exposure into basis-projected and residual parts.
    Decompose {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; overrides `data.path`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Linear IV fit or doubly robust truncated exposure effects.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<Model>,
        /// 2sls, 2sri or doublepred.
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<IvStrategy>,
    },
    /// Replicate the simulation benchmark and compare with reference values.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Overrides `replicates`.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Estimates across basis dimensions.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Exposure-response curve on a grid.
    Erc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<IvStrategy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown strategy `{s}` (expected 2sls, 2sri or doublepred)"))
}

fn execute<T: CommandConfig>(
    common: &Common,
    data: Option<PathBuf>,
    tweak: impl FnOnce(&mut T),
    run: fn(&T, &RunContext) -> Result<String, CliError>,
) -> Result<String, CliError> {
    let mut cfg: T = config::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.apply_seed(seed);
    }
    if let Some(p) = data {
        cfg.apply_data(p)?;
    }
    tweak(&mut cfg);
    std::fs::create_dir_all(&common.out)?;
    write_json(&common.out.join(RESOLVED_CONFIG), &cfg)?;
    let ctx = RunContext {
        out: common.out.clone(),
        format: common.format,
    };
    in_pool(common.threads, || run(&cfg, &ctx))
}

#[cfg(feature = "parallel")]
fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R, CliError> + Send) -> Result<R, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R, CliError> + Send) -> Result<R, CliError> {
    if threads.is_some_and(|n| n > 1) {
        eprintln!("note: built without the `parallel` feature; running on one thread");
    }
    f()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common } => execute(&common, None, |_: &mut config::SimulateConfig| {}, commands::simulate::run),
        Command::Decompose { common, data } => {
            execute(&common, data, |_: &mut config::DecomposeConfig| {}, commands::decompose::run)
        }
        Command::Estimate {
            common,
            data,
            model,
            strategy,
        } => execute(
            &common,
            data,
            |c: &mut config::EstimateConfig| {
                if let Some(m) = model {
                    c.model = m;
                }
                if let Some(s) = strategy {
                    c.strategy = s;
                }
            },
            commands::estimate::run,
        ),
        Command::Benchmark { common, replicates } => execute(
            &common,
            None,
            |c: &mut config::BenchmarkConfig| {
                if let Some(m) = replicates {
                    c.replicates = m;
                }
            },
            commands::benchmark::run,
        ),
        Command::Sensitivity { common, data } => {
            execute(&common, data, |_: &mut config::SensitivityConfig| {}, commands::sensitivity::run)
        }
        Command::Erc { common, data } => execute(&common, data, |_: &mut config::ErcRunConfig| {}, commands::erc::run),
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
