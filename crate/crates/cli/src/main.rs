use std::process::ExitCode;

use clap::Parser;
use serre_cli::{run_experiment, CliError, RawConfig, RunConfig};

/// Run verification experiments for the linearized Serre DG solver.
#[derive(Debug, Parser)]
#[command(name = "serre", version)]
struct Args {
    /// run, converge, conserve, gaussian, sbp-check or validate-bc.
    #[arg(long)]
    experiment: Option<String>,

    /// File of key=value lines.
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<String>,

    /// Override one key, e.g. `--set U=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for s in &args.set {
        raw.set_line(s)?;
    }
    if let Some(e) = &args.experiment {
        raw.set("experiment", e)?;
    }
    if let Some(o) = &args.out {
        raw.set("out", o)?;
    }
    RunConfig::resolve(&raw)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(&args).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(manifest) => {
            println!("{manifest}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
