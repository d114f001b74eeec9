//! Command-line front end.

mod figures;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use figures::{figure_files, FigureError, FigureRequest, FIGURE_NAMES};

use crate::protocol::trace;
use crate::protocol::Variant;
use crate::sim::{
    read_results, run_config, sweep, write_results, ConfigError, ResultRow, RunOptions,
    ScenarioConfig,
};

pub const OUTPUT_DIR_ENV: &str = "MTMS_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mtms", version, about = "Secure trust-aware D2D multicast simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its result row, trace and config echo.
    Run(RunArgs),
    /// Run the configured grid of scenarios.
    Sweep(SweepArgs),
    /// Turn results CSVs into plot-ready data files.
    Figures(FiguresArgs),
    /// Check a config file without running anything.
    ValidateConfig(ValidateArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct Overrides {
    /// TOML config file; unspecified keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub malicious_fraction: Option<f64>,
    #[arg(long)]
    pub file_bits: Option<u64>,
    #[arg(long)]
    pub devices: Option<u32>,
    #[arg(long)]
    pub tamper_prob: Option<f64>,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = "results")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Skip writing the message trace.
    #[arg(long)]
    pub no_trace: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Comma-separated variants replacing `sweep.variants`.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,
    #[arg(long, value_delimiter = ',')]
    pub malicious_fractions: Option<Vec<f64>>,
    #[arg(long = "file-bits-list", value_delimiter = ',')]
    pub file_bits_list: Option<Vec<u64>>,
    /// Seeds as a list and/or ranges, e.g. `1-10` or `1,4,7`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Run points one after another instead of in parallel.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    /// One or more results CSVs; rows are pooled.
    #[arg(long, required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = "results")]
    pub output_dir: PathBuf,
    /// File size used for the malicious-fraction figures.
    #[arg(long, default_value_t = 500_000)]
    pub ref_file_bits: u64,
    /// Malicious percentage used for the file-size figures.
    #[arg(long, default_value_t = 0.0)]
    pub ref_malicious_pct: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

/// Failure classes mapped onto exit codes 1 and 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// File config with command-line overrides applied on top.
pub fn effective_config(o: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &o.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.variant {
        cfg.variant = v;
    }
    if let Some(v) = o.malicious_fraction {
        cfg.malicious_fraction = v;
    }
    if let Some(v) = o.file_bits {
        cfg.file_bits = v;
    }
    if let Some(v) = o.devices {
        cfg.devices = v;
    }
    if let Some(v) = o.tamper_prob {
        cfg.tamper_prob = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::new("seeds", format!("cannot parse `{spec}`"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn results_bytes(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_results(rows, &mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

pub fn cmd_run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = effective_config(&args.common)?;
    let out = &args.common.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let result = run_config(
        &cfg,
        RunOptions {
            keep_trace: !args.no_trace,
        },
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut written = Vec::new();
    let results = out.join("results.csv");
    write_file(&results, &results_bytes(std::slice::from_ref(&result.row))?)?;
    written.push(results);
    if !args.no_trace {
        let path = out.join("trace.csv");
        let mut buf = Vec::new();
        trace::write_csv(&result.trace, &mut buf).map_err(|e| io_err(&path, e))?;
        write_file(&path, &buf)?;
        written.push(path);
    }
    let echo = out.join("config.toml");
    write_file(&echo, cfg.to_toml().as_bytes())?;
    written.push(echo);
    Ok(written)
}

pub fn sweep_config(args: &SweepArgs) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = effective_config(&args.common)?;
    if let Some(v) = &args.variants {
        cfg.sweep.variants = v.clone();
    }
    if let Some(v) = &args.malicious_fractions {
        cfg.sweep.malicious_fractions = v.clone();
    }
    if let Some(v) = &args.file_bits_list {
        cfg.sweep.file_bits = v.clone();
    }
    if let Some(s) = &args.seeds {
        cfg.sweep.seeds = parse_seeds(s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = sweep_config(args)?;
    let out = &args.common.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let outcome = sweep(&cfg, &cfg.sweep, !args.serial);
    let rows: Vec<ResultRow> = outcome.results.iter().map(|r| r.row.clone()).collect();
    let results = out.join("sweep_results.csv");
    write_file(&results, &results_bytes(&rows)?)?;
    let echo = out.join("sweep_config.toml");
    write_file(&echo, cfg.to_toml().as_bytes())?;
    if !outcome.failures.is_empty() {
        let lines: Vec<String> = outcome
            .failures
            .iter()
            .map(|f| {
                format!(
                    "  {} fraction={} file_bits={} seed={}: {}",
                    f.point.variant, f.point.malicious_fraction, f.point.file_bits, f.point.seed, f.error
                )
            })
            .collect();
        return Err(CliError::Runtime(format!(
            "{} of {} sweep points failed (results for the rest are in {}):\n{}",
            lines.len(),
            lines.len() + rows.len(),
            results.display(),
            lines.join("\n")
        )));
    }
    Ok(vec![results, echo])
}

pub fn cmd_figures(args: &FiguresArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for path in &args.results {
        let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
        rows.extend(read_results(file).map_err(|e| io_err(path, e))?);
    }
    let out = &args.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let req = FigureRequest {
        ref_file_bits: args.ref_file_bits,
        ref_malicious_pct: args.ref_malicious_pct,
    };
    let mut written = Vec::new();
    let mut errors = Vec::new();
    for (name, result) in figure_files(&rows, &req) {
        match result {
            Ok(text) => {
                let path = out.join(format!("{name}.dat"));
                write_file(&path, text.as_bytes())?;
                written.push(path);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    if errors.is_empty() {
        Ok(written)
    } else {
        Err(CliError::Runtime(errors.join("\n")))
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(&args.config)?;
    Ok(format!("{}: ok (config hash {})", args.config.display(), cfg.hash()))
}

pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let paths = |v: Vec<PathBuf>| v.iter().map(|p| p.display().to_string()).collect();
    match &cli.command {
        Command::Run(a) => cmd_run(a).map(paths),
        Command::Sweep(a) => cmd_sweep(a).map(paths),
        Command::Figures(a) => cmd_figures(a).map(paths),
        Command::ValidateConfig(a) => cmd_validate(a).map(|s| vec![s]),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
