use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfstrack::cli::{run_mta_map, run_track, run_verify, Overrides};
use rfstrack::Error;

#[derive(Parser)]
#[command(name = "rfstrack", about = "Multitarget tracking runs and numerical verification")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Output directory (overrides run.out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Random seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run the configured GLMB filter on it.
    Track { config: PathBuf },
    /// Run the numerical verification suite.
    Verify { config: PathBuf },
    /// Run the fixed-track MAP association baseline.
    #[command(name = "mta-map")]
    MtaMap { config: PathBuf },
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } | Error::Io { .. } | Error::Json(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out_dir: args.out,
        seed: args.seed,
    };
    match args.command {
        Command::Track { config } => match run_track(&config, &overrides) {
            Ok(s) => {
                println!(
                    "{} steps, mean OSPA {:.4}, outputs in {}",
                    s.steps,
                    s.mean_ospa(),
                    s.out_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::MtaMap { config } => match run_mta_map(&config, &overrides) {
            Ok(s) => {
                println!(
                    "{} steps, mean OSPA {:.4}, outputs in {}",
                    s.steps,
                    s.mean_ospa(),
                    s.out_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::Verify { config } => match run_verify(&config, &overrides) {
            Ok(v) if v.passed => {
                println!("{} checks passed, report in {}", v.records.len(), v.out_dir.display());
                ExitCode::SUCCESS
            }
            Ok(v) => {
                for r in v.failures() {
                    eprintln!(
                        "FAILED {} (seed {}): lhs {} rhs {} gap {:.3e} > {:.1e}",
                        r.check, r.seed, r.lhs, r.rhs, r.relative_gap, r.tolerance
                    );
                }
                ExitCode::from(1)
            }
            Err(e) => exit_for(&e),
        },
    }
}
