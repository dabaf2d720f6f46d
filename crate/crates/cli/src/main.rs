use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use lqg_coding::codec::StrategyKind;
use lqg_coding::experiment::{self, ExperimentConfig, Table};
use lqg_coding::Error;

#[derive(Parser, Debug)]
#[command(name = "lqg-coding", version, about = "LQG control over a fixed-rate channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path; defaults to the config's output path, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Add Monte Carlo escape times to the table.
    #[arg(long, global = true)]
    simulate: bool,

    /// Override the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Restrict to one strategy (I, II or III).
    #[arg(long, global = true)]
    strategy: Option<StrategyKind>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Controller gain, closed loop and model checks.
    Design,
    /// Bound, analytic escape time and costs per control weight.
    Table,
    /// Output trace of one closed-loop run.
    Trace,
    /// Per-strategy bound search.
    Escape,
    /// Monte Carlo escape time and cost.
    Simulate,
}

/// Exit code 2 for bad input, 1 for failures while running.
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn from_core(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Dimension(_) | Error::Domain(_) => Failure::Input(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Input(anyhow!("--config is required")))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Input)?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Input)?;
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let (Some(kind), Command::Table) = (cli.strategy, cli.command) {
        cfg.strategies = vec![kind];
    }
    cfg.validate().map_err(Failure::from_core)?;
    Ok(cfg)
}

fn write_table(table: &Table, out: Option<&Path>) -> anyhow::Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    let outputs = &cfg.outputs;
    let (table, configured) = match cli.command {
        Command::Design => {
            let (table, findings) = experiment::design(&cfg).map_err(Failure::from_core)?;
            for (rc, fs) in &findings {
                for f in fs.iter().filter(|f| !f.passed) {
                    eprintln!("rc={rc}: {}", f.message);
                }
            }
            if table.failures > 0 {
                write_table(&table, cli.out.as_deref().or(outputs.design.as_deref())).map_err(Failure::Runtime)?;
                return Err(Failure::Input(anyhow!("model validation failed")));
            }
            (table, &outputs.design)
        }
        Command::Table => (
            experiment::table(&cfg, cli.simulate).map_err(Failure::from_core)?,
            &outputs.table,
        ),
        Command::Escape => (
            experiment::escape(&cfg, cli.strategy).map_err(Failure::from_core)?,
            &outputs.escape,
        ),
        Command::Simulate => (
            experiment::simulate(&cfg, cli.strategy).map_err(Failure::from_core)?,
            &outputs.simulate,
        ),
        Command::Trace => {
            let kind = cli.strategy.unwrap_or(cfg.strategies[0]);
            let trace = experiment::trace(&cfg, kind).map_err(Failure::from_core)?;
            (experiment::trace_table(&trace), &outputs.trace)
        }
    };
    write_table(&table, cli.out.as_deref().or(configured.as_deref())).map_err(Failure::Runtime)?;
    if table.failures > 0 {
        return Err(Failure::Runtime(anyhow!("{} row(s) failed", table.failures)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
