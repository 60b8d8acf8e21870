use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod scenarios;
mod table;
mod verify;

use config::{ExperimentConfig, Overrides};

/// Experiments for càdlàg rough stochastic analysis.
#[derive(Debug, Parser)]
#[command(name = "cadrough", version)]
struct Cli {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Number of dyadic refinement levels.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Ensemble size.
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config; writes CSV and a manifest.
    Run { config: PathBuf },
    /// Run a fixed-size verification suite.
    Verify { suite: String },
    /// List scenarios and verification suites.
    List,
}

const EXIT_USAGE: u8 = 1;
const EXIT_FAILED: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides { seed: cli.seed, out: cli.out, levels: cli.levels, ensemble: cli.ensemble });
            let table = scenarios::run(&cfg)?;
            let (csv, manifest) = table::write_outputs(&cfg, &table)?;
            println!("{} rows -> {}", table.len(), csv.display());
            println!("manifest -> {}", manifest.display());
            Ok(0)
        }
        Command::Verify { suite } => {
            let Some(s) = verify::find(&suite) else {
                let ids: Vec<&str> = verify::SUITES.iter().map(|s| s.id).collect();
                anyhow::bail!("unknown suite {suite:?}; known: {ids:?}");
            };
            let checks = (s.run)(cli.seed.unwrap_or(0))?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.pass);
            }
            println!("{suite}: {} of {} checks passed", checks.len() - failed, checks.len());
            Ok(if failed == 0 { 0 } else { EXIT_FAILED })
        }
        Command::List => {
            println!("scenarios:");
            for s in &scenarios::SCENARIOS {
                println!("  {:<16} {}", s.id, s.about);
            }
            println!("suites:");
            for s in &verify::SUITES {
                println!("  {:<16} {}", s.id, s.about);
            }
            Ok(0)
        }
    }
}
