use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freebound::scenario::{compare, dump_info, run, validate_operator, RunOptions};

#[derive(Parser)]
#[command(name = "freebound", version, about = "Free boundary solver and diagnostics on the half disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario, run its analyses and write the report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Omit timings so reports from identical runs are byte-identical.
        #[arg(long)]
        normalize_report: bool,
    },
    /// Check an operator file against the structural hypotheses.
    ValidateOperator {
        operator: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Per-metric differences between two reports of the same scenario.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Header and statistics of a field dump.
    DumpInfo { field: PathBuf },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), freebound::Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            normalize_report,
        } => run(
            &scenario,
            &RunOptions {
                out,
                seed,
                normalize: normalize_report,
            },
        )
        .and_then(|r| {
            print_json(&r)?;
            for f in &r.flags {
                eprintln!("flag: {f}");
            }
            if let Some(e) = &r.error {
                eprintln!("error: {e}");
            }
            Ok(r.status.exit_code())
        }),
        Command::ValidateOperator { operator, seed, samples } => {
            validate_operator(&operator, samples, seed).and_then(|r| {
                print_json(&r)?;
                let failed = r.failed_hypotheses();
                if failed.is_empty() {
                    Ok(0)
                } else {
                    eprintln!("failed: {}", failed.join(", "));
                    Ok(1)
                }
            })
        }
        Command::Compare { a, b, tolerance } => compare(&a, &b, tolerance).and_then(|r| {
            print_json(&r)?;
            Ok(0)
        }),
        Command::DumpInfo { field } => dump_info(&field).and_then(|r| {
            print_json(&r)?;
            Ok(0)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
