//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fabcheck_core::battery::{run_battery, BatteryConfig, BatteryError};
use fabcheck_core::digits::DigitPosition;
use fabcheck_core::dispersion::VarianceTest;
use fabcheck_core::model::{CalibrationScale, Category, CATEGORY_COUNT};
use fabcheck_core::simulation::{self, PopulationSpec, SamplingMode, SimulationConfig, SimulationError};

use crate::config::{self, ConfigError, FileConfig, VarianceTestKind};
use crate::plots::{emit_plot_data, PlotError};
use crate::report::{emit_report, ReportFormat};
use crate::table::{self, TableError};

/// Overrides the default seed of `analyze` and `simulate`.
pub const SEED_ENV: &str = "FABCHECK_SEED";
pub const DEFAULT_PERMUTATION_ROUNDS: u32 = 999;

pub const EXIT_CLEAN: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_SEVERE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fabcheck", version, about = "Forensic checks for fabricated replicate count data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full battery over a count table.
    ///
    /// Exits 0 when no severe flag is raised, 2 when one is, 1 on error.
    Analyze(AnalyzeArgs),
    /// Write an honest simulated count table.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV with header label,A,B,C,D,E and two rows per label.
    pub input: PathBuf,
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Calibration weights for categories A-E.
    #[arg(long, value_parser = parse_scale, value_name = "W1,W2,W3,W4,W5")]
    pub scale: Option<CalibrationScale>,
    #[arg(long)]
    pub population_size: Option<u64>,
    /// Must equal the slide total of the table when given.
    #[arg(long)]
    pub cells_per_slide: Option<u64>,
    #[arg(long)]
    pub replicates: Option<u32>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Digit flags at or below this p-value are severe.
    #[arg(long)]
    pub severe_alpha: Option<f64>,
    #[arg(long, value_parser = parse_category)]
    pub digit_column: Option<Category>,
    /// last or second-to-last.
    #[arg(long)]
    pub digit_position: Option<DigitPosition>,
    /// Label prefix of the control points used for dispersion and simulation.
    #[arg(long)]
    pub control: Option<String>,
    #[arg(long, value_enum)]
    pub variance_test: Option<VarianceTestKind>,
    #[arg(long)]
    pub permutation_rounds: Option<u32>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingArg>,
    #[arg(long)]
    pub theoretical_ratio_threshold: Option<f64>,
    /// Also write the structured report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Existing directory for fig1.csv and fig2.csv.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    /// Format printed on stdout.
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Category counts of the cell population, A-E.
    #[arg(long, value_parser = parse_population, value_name = "A,B,C,D,E")]
    pub population: PopulationSpec,
    #[arg(long, default_value_t = 12)]
    pub points: u32,
    #[arg(long, default_value_t = 500)]
    pub cells_per_slide: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "without-replacement")]
    pub sampling: SamplingArg,
    /// Label prefix of the generated points.
    #[arg(long, default_value = "sim")]
    pub label: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SamplingArg {
    WithoutReplacement,
    WithReplacement,
}

impl From<SamplingArg> for SamplingMode {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::WithoutReplacement => SamplingMode::WithoutReplacement,
            SamplingArg::WithReplacement => SamplingMode::WithReplacement,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid setting: {0}")]
    Setting(String),
    #[error("{}: {source}", path.display())]
    Table { path: PathBuf, source: TableError },
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
}

fn parse_floats<const N: usize, T: std::str::FromStr>(s: &str) -> Result<[T; N], String> {
    let parts: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("'{}' is not a number", p.trim())))
        .collect::<Result<_, _>>()?;
    let n = parts.len();
    parts.try_into().map_err(|_| format!("expected {N} comma-separated values, got {n}"))
}

fn parse_scale(s: &str) -> Result<CalibrationScale, String> {
    let w: [f64; CATEGORY_COUNT] = parse_floats(s)?;
    CalibrationScale::new(w).map_err(|e| e.to_string())
}

fn parse_population(s: &str) -> Result<PopulationSpec, String> {
    let c: [u64; CATEGORY_COUNT] = parse_floats(s)?;
    PopulationSpec::new(c).map_err(|e| e.to_string())
}

fn parse_category(s: &str) -> Result<Category, String> {
    let mut chars = s.chars();
    match (chars.next().and_then(Category::from_letter), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format!("'{s}' is not one of A, B, C, D, E")),
    }
}

/// Settings for one `analyze` run after merging file, environment and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub battery: BatteryConfig,
    pub scale: CalibrationScale,
    pub cells_per_slide: Option<u64>,
    pub format: ReportFormat,
}

pub fn resolve(a: &AnalyzeArgs, file: &FileConfig) -> Result<Resolved, CliError> {
    let defaults = BatteryConfig::default();
    let scale = match (&a.scale, &file.scale) {
        (Some(s), _) => *s,
        (None, Some(w)) => {
            let w: [f64; CATEGORY_COUNT] = w
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Setting(format!("scale needs {CATEGORY_COUNT} weights")))?;
            CalibrationScale::new(w).map_err(|e| CliError::Setting(e.to_string()))?
        }
        (None, None) => CalibrationScale::STANDARD,
    };
    let rounds = a
        .permutation_rounds
        .or(file.permutation_rounds)
        .unwrap_or(DEFAULT_PERMUTATION_ROUNDS);
    let variance_test = match a.variance_test.or(file.variance_test) {
        None | Some(VarianceTestKind::F) => VarianceTest::FRatio,
        Some(VarianceTestKind::Permutation) => VarianceTest::Permutation { rounds },
    };
    let battery = BatteryConfig {
        simulation: SimulationConfig {
            seed: a.seed.or(file.seed).unwrap_or(defaults.simulation.seed),
            replicates: a.replicates.or(file.replicates).unwrap_or(defaults.simulation.replicates),
            sampling: a
                .sampling
                .map(SamplingMode::from)
                .or(file.sampling)
                .unwrap_or(defaults.simulation.sampling),
            ..defaults.simulation
        },
        alpha: a.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        severe_alpha: a.severe_alpha.or(file.severe_alpha).unwrap_or(defaults.severe_alpha),
        population_size: a.population_size.or(file.population_size).unwrap_or(defaults.population_size),
        digit_column: a.digit_column.or(file.digit_column).unwrap_or(defaults.digit_column),
        digit_position: a.digit_position.or(file.digit_position).unwrap_or(defaults.digit_position),
        control_prefix: a.control.clone().or_else(|| file.control.clone()),
        variance_test,
        theoretical_ratio_threshold: a
            .theoretical_ratio_threshold
            .or(file.theoretical_ratio_threshold)
            .unwrap_or(defaults.theoretical_ratio_threshold),
    };
    Ok(Resolved {
        battery,
        scale,
        cells_per_slide: a.cells_per_slide.or(file.cells_per_slide),
        format: a.format.or(file.format).unwrap_or_default(),
    })
}

/// Runs one command, writing the primary output to `out`. Returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    match &cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Simulate(s) => simulate(s, out),
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write { path: path.clone(), source })
}

fn analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let file = match &a.config {
        Some(p) => config::load(p)?,
        None => FileConfig::default(),
    };
    let cfg = resolve(a, &file)?;
    let d = table::read_dataset(&a.input, cfg.scale).map_err(|source| CliError::Table {
        path: a.input.clone(),
        source,
    })?;
    if let (Some(want), Some(have)) = (cfg.cells_per_slide, d.slide_total()) {
        if want != have as u64 {
            return Err(CliError::Setting(format!(
                "cells-per-slide is {want} but the table's slides hold {have} cells"
            )));
        }
    }
    let report = run_battery(&d, &cfg.battery)?;

    if let Some(path) = &a.report {
        write_file(path, &emit_report(&report, ReportFormat::Structured))?;
    }
    if let Some(dir) = &a.plots {
        emit_plot_data(&report, dir)?;
    }
    out.write_all(&emit_report(&report, cfg.format))
        .map_err(|source| CliError::Write { path: "<stdout>".into(), source })?;
    Ok(if report.has_severe() { EXIT_SEVERE } else { EXIT_CLEAN })
}

fn simulate(s: &SimulateArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let cfg = SimulationConfig {
        n_points: s.points,
        cells_per_slide: s.cells_per_slide,
        seed: s.seed,
        replicates: 1,
        sampling: s.sampling.into(),
    };
    let mut d = simulation::simulate_dataset(&s.population, &cfg, &CalibrationScale::STANDARD)?;
    for (i, p) in d.points.iter_mut().enumerate() {
        p.label = format!("{} {}", s.label, i + 1);
    }
    let mut bytes = Vec::new();
    table::write_dataset(&d, &mut bytes).map_err(|e| CliError::Setting(e.to_string()))?;
    match &s.output {
        Some(path) => write_file(path, &bytes)?,
        None => out
            .write_all(&bytes)
            .map_err(|source| CliError::Write { path: "<stdout>".into(), source })?,
    }
    Ok(EXIT_CLEAN)
}
