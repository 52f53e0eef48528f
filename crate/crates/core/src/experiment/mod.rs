//! Configured runs: vortex solves, metric samples, ε-sweeps, spectra and
//! the Lax–Milgram suite, each writing CSV tables with a schema file.
//!
//! Runs are registered by name and looked up at runtime by the command-line
//! front end.

mod config;
mod output;
mod runs;
mod selftest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use config::{ConfigError, DivisorSpec, ExperimentConfig, MAX_L_MAX};
pub use output::{num, read_grid_dump, Sink, Table, PROVENANCE_COLUMNS};
pub use runs::{
    empirical_constant, moduli_fields, random_laxmilgram_instance, run_sweep, spectrum_summary,
    CheckLaxMilgram, FitRecord, MetricSampleRun, SolveVortex, SpectrumLevel, SpectrumRun,
    SpectrumSummary, Sweep, SweepReport,
};
pub use selftest::{selftest_checks, SelfTest, SelfTestCheck};

use crate::bundle::{constant_curvature_weight, HermitianStructure};
use crate::error::Error;
use crate::sphere::{SphereGrid, SurfaceMetric};

/// Everything a run needs besides its own code.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub output_dir: PathBuf,
}

impl RunContext {
    pub fn new(config: ExperimentConfig, output_dir: &Path) -> Self {
        let config_hash = config.hash();
        Self {
            config,
            config_hash,
            output_dir: output_dir.to_path_buf(),
        }
    }

    pub fn sink(&self) -> Result<Sink, RunError> {
        Ok(Sink::new(
            &self.output_dir,
            &self.config_hash,
            self.config.l_max,
        )?)
    }

    /// Hermitian structure of the configured degree and surface metric.
    pub fn structure(&self) -> Result<HermitianStructure, RunError> {
        structure_for(&self.config, self.config.l_max, self.config.n)
    }
}

pub(crate) fn structure_for(
    cfg: &ExperimentConfig,
    l_max: usize,
    n: usize,
) -> Result<HermitianStructure, RunError> {
    let grid = Arc::new(SphereGrid::new(l_max)?);
    let metric = SurfaceMetric::from_rho_terms(grid, &cfg.rho_coeffs)
        .map_err(|e| RunError::Config(ConfigError::new("rho_coeffs", e.to_string())))?;
    Ok(constant_curvature_weight(Arc::new(metric), n)?)
}

/// What a finished run reports.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    /// Rows or checks that failed; a nonzero count means exit status 1.
    pub failures: usize,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(Error),
    Io(std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(_) | RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Compute(e) => write!(f, "computation failed ({}): {e}", e.code()),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Compute(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

pub trait Experiment: Send + Sync {
    /// Subcommand name.
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, ctx: &RunContext) -> Result<Outcome, RunError>;
}

static REGISTRY: [&dyn Experiment; 6] = [
    &SolveVortex,
    &MetricSampleRun,
    &Sweep,
    &SpectrumRun,
    &CheckLaxMilgram,
    &SelfTest,
];

pub fn experiments() -> &'static [&'static dyn Experiment] {
    &REGISTRY
}

pub fn experiment(name: &str) -> Option<&'static dyn Experiment> {
    REGISTRY.iter().copied().find(|e| e.name() == name)
}

/// Runs a registered experiment and writes `run.json` next to its output.
pub fn run_named(name: &str, ctx: &RunContext) -> Result<Outcome, RunError> {
    let exp = experiment(name).ok_or_else(|| {
        let names: Vec<_> = REGISTRY.iter().map(|e| e.name()).collect();
        ConfigError::new(
            "subcommand",
            format!("unknown run `{name}` (available: {})", names.join(", ")),
        )
    })?;
    let mut outcome = exp.run(ctx)?;
    let mut sink = ctx.sink()?;
    sink.json(
        "run",
        &serde_json::json!({
            "subcommand": name,
            "config_hash": ctx.config_hash,
            "config": ctx.config,
            "failures": outcome.failures,
        }),
    )?;
    outcome.files.extend(sink.written().iter().cloned());
    Ok(outcome)
}
