use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use cvdv_cli::{build_config, render, threads_from_env, write_atomic, Cli, Precision};
use cvdv_core::optimize::sweep::{run_sweep, SweepConfig};
use cvdv_core::Real;

const EXIT_ROW_ERRORS: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn run<T: Real>(cfg: &SweepConfig) -> Result<usize, String> {
    let result = run_sweep::<T>(cfg).map_err(|e| e.to_string())?;
    let bytes = render(cfg, &result)?;
    match &cfg.output.path {
        Some(path) => write_atomic(path, &bytes)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| format!("cannot write output: {e}"))?,
    }
    for row in result.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "row {}: {}",
            row.index,
            row.error.as_deref().unwrap_or_default()
        );
    }
    if let Some(d) = result.max_check_deviation() {
        eprintln!("max check deviation: {:e}", d.as_f64());
    }
    Ok(result.error_count())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = cli.command.split();
    let precision = args.precision.unwrap_or_default();

    match threads_from_env() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let cfg = match build_config(mode, &args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match precision {
        Precision::F64 => run::<f64>(&cfg),
        Precision::F32 => run::<f32>(&cfg),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} row(s) failed");
            ExitCode::from(EXIT_ROW_ERRORS)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
