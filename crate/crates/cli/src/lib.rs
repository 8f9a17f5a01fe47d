//! Command-line front end for `restorekit`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod manifest;

pub use args::{Cli, Command};
pub use config::PipelineConfig;
pub use error::{CliError, CliResult};

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Degrade(a) => {
            let m = commands::degrade::run(&PipelineConfig::resolve(a)?)?;
            eprintln!("degraded {} image(s)", m.items.len());
        }
        Command::Cues(a) => {
            let m = commands::cues::run(&PipelineConfig::resolve(a)?)?;
            eprintln!("wrote cues for {} image(s)", m.items.len());
        }
        Command::Restore(a) => {
            let m = commands::restore::run(&PipelineConfig::resolve(a)?)?;
            eprintln!("restored {} image(s)", m.items.len());
        }
        Command::ControlForward(a) => {
            let mut cfg = PipelineConfig::resolve(&a.common)?;
            if let Some(t) = a.timestep {
                cfg.timestep = Some(t);
            }
            let m = commands::control::run(&cfg, a)?;
            eprintln!("control pass over {} image(s), {} parameters", m.items.len(), m.params);
        }
        Command::Schedule(a) => {
            commands::schedule::run(&PipelineConfig::resolve(a)?)?;
        }
        Command::Evaluate(a) => {
            commands::evaluate::run(&PipelineConfig::resolve(a)?)?;
        }
        Command::Grid(a) => {
            let l = commands::grid::run(&PipelineConfig::resolve(&a.common)?, &a.methods)?;
            eprintln!("grid {}×{} ({} rows, {} columns)", l.height, l.width, l.rows.len(), l.columns.len());
        }
    }
    Ok(())
}
