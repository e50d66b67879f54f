use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use coopnet_cli::{run, Overrides};

/// Run a coopnet experiment described by a TOML file.
#[derive(Debug, Parser)]
#[command(name = "coopnet", version)]
struct Args {
    /// Experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per cell.
    #[arg(long)]
    trials: Option<u64>,
    /// Relative quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Move relays that make MRC singular by this distance.
    #[arg(long, num_args = 0..=1, default_missing_value = "1e-6")]
    eta_nudge: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        trials: args.trials,
        tolerance: args.tol,
        workers: args.workers,
        eta_nudge: args.eta_nudge,
    };
    let mut print = |c: &coopnet_cli::acceptance::Check| eprintln!("{}", c.line());
    match run(&args.config, &overrides, &mut print) {
        Ok(outcome) => {
            for path in &outcome.written {
                eprintln!("wrote {}", path.display());
            }
            if let Some(report) = &outcome.report {
                eprintln!(
                    "{} of {} checks passed",
                    report.checks.len() - report.failures(),
                    report.checks.len()
                );
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
