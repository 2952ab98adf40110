//! Command-line front end: configuration, the analysis commands, and
//! CSV / JSON result tables.

pub mod commands;
pub mod config;
pub mod table;
pub mod validate;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use config::{Format, RunConfig};
use table::{parse_rendered, render, ResultTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mimo_adhoc::Error),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mimo_adhoc::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Core(e) => match e {
                E::NumericFailure(_) | E::ApproximationBreakdown { .. } => EXIT_NUMERIC,
                E::InvalidParameter(_) | E::UnsupportedMoment(_) | E::UnsupportedCombination(_) | E::Cache(_) => {
                    EXIT_CONFIG
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    SinrCdf,
    Moments,
    CapacitySweep,
    OptimalDensity,
    Validate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::SinrCdf => "sinr-cdf",
            Command::Moments => "moments",
            Command::CapacitySweep => "capacity-sweep",
            Command::OptimalDensity => "optimal-density",
            Command::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| CliError::Config(format!("command: unknown command {s:?}")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "mimo-adhoc", version, about = "Throughput capacity of MIMO ad-hoc networks with MMSE receivers")]
pub struct Cli {
    /// Command to run. Optional with --replay, which takes it from the table.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable, applied after --config).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
    /// Master seed (same as --set seed=N).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per configuration (same as --set trials=N).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Re-run the command recorded in the metadata of a previous output.
    #[arg(long, value_name = "TABLE")]
    pub replay: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

/// Result of one command.
#[derive(Debug)]
pub struct Outcome {
    pub tables: Vec<ResultTable>,
    pub failed_checks: usize,
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let tables = match cmd {
        Command::SinrCdf => commands::sinr_cdf(cfg)?,
        Command::Moments => commands::moments(cfg)?,
        Command::CapacitySweep => commands::capacity_sweep(cfg)?,
        Command::OptimalDensity => commands::optimal_density_cmd(cfg)?,
        Command::Validate => {
            let (tables, failed_checks) = commands::validate(cfg)?;
            return Ok(Outcome { tables, failed_checks });
        }
    };
    Ok(Outcome { tables, failed_checks: 0 })
}

/// Command and configuration recorded in a previously rendered output.
pub fn replay_source(text: &str) -> Result<(Command, RunConfig), CliError> {
    let tables = parse_rendered(text)?;
    let first = tables.first().ok_or_else(|| CliError::Config("replay: no table found".into()))?;
    let cmd = first
        .metadata
        .get("command")
        .ok_or_else(|| CliError::Config("replay: metadata has no command".into()))?;
    Ok((Command::parse(cmd)?, RunConfig::from_pairs(&first.metadata)?))
}

fn resolve(cli: &Cli) -> Result<(Command, RunConfig), CliError> {
    let (recorded, mut cfg) = match &cli.replay {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("replay: cannot read {}: {e}", path.display())))?;
            let (cmd, cfg) = replay_source(&text)?;
            (Some(cmd), cfg)
        }
        None => (None, RunConfig::default()),
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for item in &cli.overrides {
        cfg.apply_override(item)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    let cmd = cli
        .command
        .or(recorded)
        .ok_or_else(|| CliError::Config("command: none given".into()))?;
    Ok((cmd, cfg))
}

/// Runs the CLI and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let result = resolve(&cli).and_then(|(cmd, cfg)| {
        let outcome = execute(cmd, &cfg)?;
        let text = render(&outcome.tables, cli.format);
        match &cli.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(outcome.failed_checks)
    });
    match result {
        Ok(0) => EXIT_OK,
        Ok(n) => {
            eprintln!("{n} validation check(s) failed");
            EXIT_VALIDATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Small configuration used to exercise every table-producing command.
pub fn determinism_config(base: &RunConfig) -> RunConfig {
    let mut cfg = base.clone();
    cfg.m = vec![2, 4];
    cfg.k = vec![0, 2, 20];
    cfg.detector = vec![mimo_adhoc::Detector::Mmse, mimo_adhoc::Detector::ZeroForcing, mimo_adhoc::Detector::PartialCsi];
    cfg.trials = 400;
    cfg.outer = 200;
    cfg.grid_points = 200;
    cfg.path = config::PathMode::Auto;
    cfg
}

/// Runs each table-producing command repeatedly (twice on the default pool,
/// once on a single thread, once replayed from its own CSV metadata) and
/// lists every rendering that differs from the first.
pub fn determinism_mismatches(base: &RunConfig) -> Result<Vec<String>, CliError> {
    let cfg = determinism_config(base);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut bad = Vec::new();
    for cmd in [Command::SinrCdf, Command::Moments, Command::CapacitySweep, Command::OptimalDensity] {
        for format in [Format::Csv, Format::Json] {
            let first = render(&execute(cmd, &cfg)?.tables, format);
            let again = render(&execute(cmd, &cfg)?.tables, format);
            let serial = single.install(|| execute(cmd, &cfg).map(|o| render(&o.tables, format)))?;
            let (rcmd, rcfg) = replay_source(&first)?;
            let replayed = render(&execute(rcmd, &rcfg)?.tables, format);
            for (label, other) in [("rerun", again), ("single-thread", serial), ("replay", replayed)] {
                if other != first {
                    bad.push(format!("{} {:?} {label}", cmd.as_str(), format));
                }
            }
        }
    }
    Ok(bad)
}
