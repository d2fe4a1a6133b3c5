//! `singconv` command line: class-A validation, operator evaluation,
//! convergence traces and rate checks driven by a JSON experiment config.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod report;

use commands::{Outcome, RunOptions};
use config::{parse_config, Format};
use report::OutDir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) | CliError::Io(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "singconv", version, about = "Singular convolution operators on the plane")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    pub out: Option<String>,
    /// Overrides `outputs.format`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated `name=value` tolerance overrides.
    #[arg(long)]
    pub seed_tolerances: Option<String>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub gnuplot_script: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the class-A conditions (a)-(f) for the configured kernel.
    Validate(Common),
    /// Evaluate L_lambda(f; x, y) once.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long)]
        lambda: f64,
    },
    /// Trace |L f - f(x0, y0)| along the configured path.
    Converge(Common),
    /// Check the rate conditions along the configured path.
    Rate(Common),
}

fn init_threads() {
    let Ok(v) = std::env::var("SINGCONV_THREADS") else {
        return;
    };
    let n: usize = v.trim().parse().unwrap_or(0);
    // A second build in the same process fails; the first pool stays.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    let common = match &cli.command {
        Command::Validate(c) | Command::Converge(c) | Command::Rate(c) => c,
        Command::Eval { common, .. } => common,
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text, common.seed_tolerances.as_deref())?;
    if let Some(f) = common.format {
        cfg.outputs.format = f;
    }
    let exp = cfg.resolve()?;
    let run = RunOptions {
        gnuplot: common.gnuplot_script,
    };
    if let Command::Eval { x, y, lambda, .. } = cli.command {
        return commands::eval(&exp, x, y, lambda);
    }
    let out = OutDir::create(common.out.as_deref().unwrap_or(&exp.config.outputs.dir))?;
    let name = match &cli.command {
        Command::Validate(_) => "validate",
        Command::Converge(_) => "converge",
        _ => "rate",
    };
    out.log(&format!("{name} start config={}", common.config.display()));
    let r = match &cli.command {
        Command::Validate(_) => commands::validate(&exp, &out, &run),
        Command::Converge(_) => commands::converge(&exp, &out, &run),
        _ => commands::rate(&exp, &out, &run),
    };
    match &r {
        Ok(o) => out.log(&format!("{name} done {o:?}")),
        Err(e) => out.log(&format!("{name} error {e}")),
    }
    r
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_threads();
    match execute(cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Fail) => 2,
        Ok(Outcome::Inconclusive) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
