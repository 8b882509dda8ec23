use std::process::ExitCode;

use clap::Parser;
use paraexp_cli::{run_rlc, run_wave, CliError, Experiment, RunArgs};

/// Parallel-in-time experiments: RLC circuit and PEC cavity.
#[derive(Debug, Parser)]
#[command(name = "paraexp", version)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    match cfg.experiment {
        Experiment::Rlc => {
            let out = run_rlc(&cfg)?;
            warn(&out.metadata.warnings);
            println!("{} max abs error: {:.6e} A", cfg.stepper, out.rk4.max_abs);
            println!("paraexp max abs error: {:.6e} A", out.paraexp.max_abs);
            match out.error_ratio {
                Some(r) => println!("paraexp/{} max-error ratio: {r:.6}", cfg.stepper),
                None => println!("paraexp/{} max-error ratio: undefined", cfg.stepper),
            }
        }
        Experiment::Wave => {
            let out = run_wave(&cfg)?;
            warn(&out.metadata.warnings);
            println!("{} max relative energy error: {:.6e}", cfg.stepper, out.sequential.max_rel);
            println!("paraexp max relative energy error: {:.6e}", out.paraexp.max_rel);
        }
    }
    println!("results written to {}", cfg.output_dir.display());
    Ok(())
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
