use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vortex_moduli::experiment::{run_named, ConfigError, ExperimentConfig, RunContext, RunError};

/// Abelian Higgs vortices on a conformally deformed two-sphere.
#[derive(Parser, Debug)]
#[command(name = "vortexlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the vortex equations for every (divisor, eps) pair.
    SolveVortex(Common),
    /// Assemble the normalised L2 metric at every (divisor, eps) pair.
    MetricSample(Common),
    /// Sweep eps and fit convergence orders.
    Sweep(Common),
    /// Compare the one-vortex moduli spectrum with Fubini-Study.
    Spectrum(Common),
    /// Check the explicit H1 bound on random Helmholtz problems.
    CheckLaxmilgram(Common),
    /// Run the closed-form checks.
    Selftest(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file; defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for CSV, JSON and binary output.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::SolveVortex(c) => ("solve-vortex", c),
            Command::MetricSample(c) => ("metric-sample", c),
            Command::Sweep(c) => ("sweep", c),
            Command::Spectrum(c) => ("spectrum", c),
            Command::CheckLaxmilgram(c) => ("check-laxmilgram", c),
            Command::Selftest(c) => ("selftest", c),
        }
    }
}

fn prepare(name: &str, opts: &Common) -> Result<RunContext, RunError> {
    let mut config = match &opts.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(threads) = opts.threads {
        if threads == 0 {
            return Err(ConfigError::new("--threads", "must be positive").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| ConfigError::new("--threads", e.to_string()))?;
    }
    let dir = opts
        .output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("vortexlab-out").join(name));
    config.output_dir = Some(dir.clone());
    Ok(RunContext::new(config, &dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, opts) = cli.command.split();
    let result = prepare(name, opts).and_then(|ctx| run_named(name, &ctx));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.failures > 0 {
                eprintln!("{name}: {} failure(s)", outcome.failures);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
