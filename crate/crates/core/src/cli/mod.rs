//! Command-line entry points. Each command reads a TOML [`RunConfig`],
//! writes its artifacts under the output directory and returns a JSON
//! report.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{cmd_evaluate, cmd_gmm_baseline, cmd_identify, cmd_robustness, cmd_synth, prepare_output, write_assignments};
pub use config::{DataConfig, EvaluateConfig, GmmSettings, Protocol, RobustnessConfig, RunConfig, ScenarioConfig};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "sstruct", version, about = "Find simple structures and train local models on them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the report as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario as CSV.
    Synth,
    /// Identify structures and write per-instance assignments.
    Identify,
    /// Bootstrap or cross-validated evaluation against the whole-data model.
    Evaluate,
    /// Overlap sweep with bootstrap evaluation at each point.
    Robustness,
    /// Fit the Gaussian mixture baseline.
    GmmBaseline,
}

impl Cli {
    pub fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

pub fn execute(cli: &Cli) -> Result<serde_json::Value> {
    let (cfg, out) = cli.resolve()?;
    prepare_output(&cfg, &out)?;
    match cli.command {
        Command::Synth => cmd_synth(&cfg, &out),
        Command::Identify => cmd_identify(&cfg, &out),
        Command::Evaluate => cmd_evaluate(&cfg, &out),
        Command::Robustness => cmd_robustness(&cfg, &out),
        Command::GmmBaseline => cmd_gmm_baseline(&cfg, &out),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parse arguments, run, and map the outcome to 0 (success), 1 (invalid
/// input or configuration) or 2 (failure during computation).
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(report) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            } else if let Some(name) = report.get("command").and_then(|c| c.as_str()) {
                let out = cli.resolve().map(|(_, o)| o).unwrap_or_default();
                println!("{name}: wrote results to {}", out.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
