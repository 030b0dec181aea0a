use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::ScenarioConfig;
use crate::error::AppError;
use crate::output::OutputDir;

#[derive(Debug, Parser)]
#[command(
    name = "sdwave",
    version,
    about = "Periodic solutions of the strongly damped wave equation at resonance"
)]
pub struct Cli {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `key=value` with a dot-separated key; the value is parsed as JSON when possible.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Mode roots, classes and splitting constants.
    Spectrum,
    /// Integrate from `simulate.initial` over `simulate.periods` periods.
    Simulate,
    /// Apply the period map once to `simulate.initial`.
    Poincare,
    /// Newton search for fixed points of the period map.
    FindPeriodic,
    /// Averaged, predicted and ladder degrees.
    Degree,
    /// LL, SR and geometric condition reports.
    CheckConditions,
    /// Averaging-theorem check on planar fields.
    VerifyAveraging,
    /// Drift identity and failed Newton search for kernel forcing.
    NonexistenceDemo,
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, AppError> {
    let cfg = ScenarioConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let out = OutputDir::create(dir)?;
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Poincare => commands::poincare(&cfg, &out),
        Command::FindPeriodic => commands::find_periodic(&cfg, &out),
        Command::Degree => commands::degree(&cfg, &out),
        Command::CheckConditions => commands::check_conditions(&cfg, &out),
        Command::VerifyAveraging => commands::verify_averaging(&cfg, &out),
        Command::NonexistenceDemo => commands::nonexistence_demo(&cfg, &out),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Failures print one JSON line on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                serde_json::json!({ "exit": 2, "kind": "usage", "message": first })
            );
            return 2;
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
