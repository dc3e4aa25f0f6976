//! `textsr`: prepare text-image corpora, train super-resolution networks,
//! search model combinations and report image-quality metrics.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
//! 4 training diverged.

mod commands;
mod config;
mod data;
mod error;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "textsr", version, about = "Super-resolution of low-resolution text images")]
struct Cli {
    /// Flat TOML file of run settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run directory [default: a timestamped directory under $TEXTSR_RUNS or ./runs].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Prepare(commands::prepare::Args),
    Train(commands::train::Args),
    Grid(commands::grid::Args),
    Infer(commands::infer::Args),
    Combine(commands::combine::Args),
    Evaluate(commands::evaluate::Args),
}

/// Settings shared by every command.
pub struct Context {
    pub cfg: RunConfig,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn run_dir(&self, command: &str) -> CliResult<PathBuf> {
        rundir::create_run_dir(self.out.as_deref(), &self.cfg, command)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Context { cfg, out: cli.out };
    match cli.command {
        Command::Prepare(a) => commands::prepare::run(a, ctx),
        Command::Train(a) => commands::train::run(a, ctx),
        Command::Grid(a) => commands::grid::run(a, ctx),
        Command::Infer(a) => commands::infer::run(a, ctx),
        Command::Combine(a) => commands::combine::run(a, ctx),
        Command::Evaluate(a) => commands::evaluate::run(a, ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
