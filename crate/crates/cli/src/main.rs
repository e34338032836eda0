//! Scenario-driven front end: `neverfall run scenario.json [--out DIR]
//! [--seed N] [--verbose]`.
//!
//! Exit codes: 0 success, 2 scenario validation error, 3 numerical failure.
//! A manifest.json is written even when the run fails, with the error
//! recorded in its result field.

mod runner;
mod scenario;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Debug)]
pub enum RunError {
    /// Bad scenario content; exit code 2.
    Validation(String),
    /// Solver or IO failure during a valid run; exit code 3.
    Numerical(String),
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Validation(m) | RunError::Numerical(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "neverfall", about = "Scenario runner for pendulum-type survival experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its artifacts.
    Run {
        /// Path to the scenario JSON document.
        scenario: PathBuf,
        /// Output directory for CSV/JSON artifacts (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Seed for sampled diagnostics; overrides the scenario's seed field.
        #[arg(long)]
        seed: Option<u64>,
        /// Progress diagnostics on stderr.
        #[arg(long)]
        verbose: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let Command::Run {
        scenario: path,
        out,
        seed,
        verbose,
    } = cli.command;

    let scenario = match scenario::load(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    };
    let seed = seed.unwrap_or(scenario.seed);

    let mut artifacts = match runner::Artifacts::new(&out) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    };

    let outcome = runner::run(&scenario, &mut artifacts, seed, verbose);
    let (result, code) = match &outcome {
        Ok(summary) => (summary.clone(), 0),
        Err(e) => (
            json!({"error": e.message(), "exit_code": e.exit_code()}),
            e.exit_code(),
        ),
    };

    let wall_clock_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_clock_unix_ms": wall_clock_ms,
        "scenario": scenario,
        "seed": seed,
        "outputs": artifacts.written,
        "result": result,
    });
    let manifest_path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    if let Err(e) = std::fs::write(&manifest_path, text) {
        eprintln!("error: cannot write manifest: {e}");
        std::process::exit(3);
    }

    if let Err(e) = outcome {
        eprintln!("error: {}", e.message());
    } else if verbose {
        eprintln!("ok: artifacts in {}", out.display());
    }
    std::process::exit(code);
}
