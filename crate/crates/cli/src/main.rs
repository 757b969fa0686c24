//! `masym`: runs one configured solve, certificate or sweep and writes its
//! artifacts plus a hashed manifest.
//!
//! Exit codes: 0 success, 1 failed certificate, 2 configuration error,
//! 3 solver divergence (the report is written to `divergence.json`).

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use masym::error::Error;

use config::Loaded;
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "masym", version, about = "Monge-Ampère system solver and moving-plane certificates")]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let loaded = match Loaded::read(&args.config).and_then(|l| l.validate().map(|_| l)) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let Some(root) = args.out.clone().or_else(|| loaded.config.output_dir.as_ref().map(|p| loaded.resolve(p))) else {
        eprintln!("error: {}", loaded.err("command", "no output directory: pass --out or set output_dir"));
        return ExitCode::from(2);
    };
    let seed = args.seed.unwrap_or(loaded.config.seed);
    let mut out = match OutputDir::lock(&root) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut ctx = run::Context {
        loaded: &loaded,
        out: &mut out,
        seed,
        quiet: args.quiet,
    };
    let result = run::dispatch(&mut ctx);
    let code = match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Core(Error::Divergence(report))) => match out.write_json("divergence.json", &report) {
            Ok(path) => {
                eprintln!(
                    "error: {} did not converge: {}; report at {}",
                    report.solver,
                    report.reason,
                    path.display()
                );
                3
            }
            Err(e) => {
                eprintln!("error: {e}");
                3
            }
        },
        Err(e @ (CliError::Config(_) | CliError::Core(Error::Configuration(_) | Error::InvalidInput(_) | Error::Parse { .. }))) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    if let Err(e) = out.finish(loaded.config.command.name(), seed, &loaded.text) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    if !args.quiet && code <= 1 {
        println!("artifacts in {}", out.root().display());
    }
    ExitCode::from(code)
}
