//! `soficlab`: runs experiment specs, manages the sofic cache, draws plots.

mod plot;
mod run;
mod spec;

use clap::{Parser, Subcommand};
use sofic_core::group_core::SoficCache;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "soficlab", version, about = "Finite-scale sofic entropy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec (TOML); appends JSONL and writes a CSV summary
    Run { spec: PathBuf },
    /// Inspect the sofic approximation cache (`$SOFICLAB_CACHE_DIR`)
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Plot the numeric statistics of a results file against d
    Plot { results: PathBuf, out: PathBuf },
}

#[derive(Subcommand)]
enum CacheAction {
    List,
    Clear,
    /// Rebuild every entry from its recipe and compare bytes
    Verify,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<spec::ValidationError>().is_some() {
        return EXIT_INVALID;
    }
    match err.downcast_ref::<sofic_core::Error>() {
        Some(sofic_core::Error::BudgetExceeded { .. }) => EXIT_BUDGET,
        _ => EXIT_FAILURE,
    }
}

fn cache_command(action: CacheAction) -> anyhow::Result<u8> {
    let cache = SoficCache::from_env();
    match action {
        CacheAction::List => {
            println!("{:<26} {:<16} {:>8} {:>8} {:>10}", "key", "group", "d", "support", "bytes");
            for e in cache.list()? {
                println!("{:<26} {:<16} {:>8} {:>8} {:>10}", e.key, e.group, e.d, e.support_size, e.bytes);
            }
            Ok(0)
        }
        CacheAction::Clear => {
            println!("removed {} entries", cache.clear()?);
            Ok(0)
        }
        CacheAction::Verify => {
            let mut failed = 0;
            for (key, result) in cache.verify()? {
                match result {
                    Ok(()) => println!("ok   {key}"),
                    Err(e) => {
                        failed += 1;
                        println!("FAIL {key}: {e}");
                    }
                }
            }
            Ok(if failed > 0 { EXIT_FAILURE } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { spec } => run::run(&spec, &SoficCache::from_env()).map(|out| {
            println!("{} records -> {}", out.records.len(), out.jsonl.display());
            println!("summary -> {}", out.csv.display());
            if let Some(svg) = out.svg {
                println!("plot -> {}", svg.display());
            }
            0
        }),
        Command::Cache { action } => cache_command(action),
        Command::Plot { results, out } => run::read_jsonl(&results).and_then(|records| {
            std::fs::write(&out, plot::render(&records))?;
            println!("{} records -> {}", records.len(), out.display());
            Ok(0)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
