use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use imager::{run, CliError, Command, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "imager",
    version,
    about = "Imaging with undetected photons: simulation and checks"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Controllable pump phase in radians (overrides `phi_p`).
    #[arg(long = "phi-p", allow_hyphen_values = true)]
    phi_p: Option<f64>,
    /// Oracle grid size n for an n x n check (overrides `oracle_grid`).
    #[arg(long = "oracle-grid")]
    oracle_grid: Option<usize>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("IMAGER_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Validation(format!(
            "IMAGER_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn execute(args: &Args) -> Result<bool, CliError> {
    configure_threads()?;
    let overrides = Overrides {
        output_dir: args.out.clone(),
        phi_p: args.phi_p,
        oracle_grid: args.oracle_grid,
    };
    let cfg = RunConfig::from_file(&args.config, &overrides)?;
    let outcome = run(args.command, &cfg)?;
    outcome.artifacts.commit(&cfg.output_dir)?;
    for name in outcome.artifacts.names() {
        println!("{}", cfg.output_dir.join(name).display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    panic::set_hook(Box::new(|info| eprintln!("imager: internal error: {info}")));
    match panic::catch_unwind(AssertUnwindSafe(|| execute(&args))) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) => {
            eprintln!("imager: check failed");
            ExitCode::from(1)
        }
        Ok(Err(e)) => {
            eprintln!("imager: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(2),
    }
}
