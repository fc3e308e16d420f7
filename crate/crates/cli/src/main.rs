mod algebra;
mod gleason;
mod ks;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kslat::rays::{load_ray_configuration, FromEntry, LoadOptions, RayConfiguration};
use kslat::rayset::{EntryMode, RaySetDocument};

/// Exit code for parse, IO and domain errors.
pub const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "kslat", version, about = "Contextuality and projection-lattice toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a ray configuration for a two-valued measure.
    ///
    /// Exit status: 0 SAT, 1 UNSAT, 2 INDETERMINATE, 3 error.
    Ks(ks::KsArgs),
    /// Central decomposition, valuation verdict and no-go certificates for
    /// a direct sum of matrix blocks such as `1,3`.
    Algebra(algebra::AlgebraArgs),
    /// Gleason measures, fractional witnesses, state presheaf sections and
    /// GNS dimensions for density operators on a configuration.
    Gleason(gleason::GleasonArgs),
    /// Re-check a certificate written by `ks` or `algebra`.
    Verify(verify::VerifyArgs),
}

/// Arithmetic selection shared by commands reading ray documents.
#[derive(Args, Debug, Clone, Copy)]
pub struct ModeArgs {
    /// Exact arithmetic over Q(√r)(i) (default for exact documents).
    #[arg(long, conflicts_with = "float")]
    pub exact: bool,
    /// Double-precision arithmetic with tolerance 1e-9.
    #[arg(long)]
    pub float: bool,
}

impl ModeArgs {
    pub fn resolve(&self, doc: &RaySetDocument) -> EntryMode {
        if self.exact {
            EntryMode::Exact
        } else if self.float {
            EntryMode::Float
        } else {
            doc.mode
        }
    }
}

pub fn read_document(path: &PathBuf) -> Result<(String, RaySetDocument)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = RaySetDocument::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((text, doc))
}

pub fn load_as<T: FromEntry>(text: &str) -> Result<RayConfiguration<T>> {
    Ok(load_ray_configuration(text, &LoadOptions::default())?)
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("KSLAT_THREADS") {
        let n: usize = value.trim().parse().with_context(|| format!("KSLAT_THREADS={value} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    match cli.command {
        Command::Ks(args) => ks::run(&args),
        Command::Algebra(args) => algebra::run(&args),
        Command::Gleason(args) => gleason::run(&args),
        Command::Verify(args) => verify::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
