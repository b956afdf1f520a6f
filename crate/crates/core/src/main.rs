use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gplab::harness::output::write_report;
use gplab::harness::sweep::write_sweep;
use gplab::harness::{run, sweep, ExperimentConfig, SweepAxis, SweepSpec};
use gplab::Error;

#[derive(Parser)]
#[command(name = "gplab", version, about = "Few-boson dynamics against the Gross-Pitaevskii flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one coupled evolution and write report.csv / report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key=value`, dotted keys address sub-tables; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a family of configurations along one axis and fit scaling slopes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// N, beta or lambda; defaults to the config's [sweep] table.
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::NumericalAbort { .. } => 3,
        _ => 2,
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            cfg.validate()?;
            let report = run(&cfg)?;
            write_report(&out, &report)?;
            eprintln!(
                "wrote {} samples to {} (C_v = {:e}, source {})",
                report.rows.len(),
                out.display(),
                report.fit.c_v,
                report.fit.c_v_source
            );
        }
        Command::Sweep { config, out, axis, values, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let spec = match (axis, values, cfg.sweep.clone()) {
                (Some(axis), Some(values), _) => SweepSpec { axis, values },
                (axis, values, Some(base)) => SweepSpec { axis: axis.unwrap_or(base.axis), values: values.unwrap_or(base.values) },
                _ => return Err(Error::Config("sweep needs --axis and --values or a [sweep] table".into())),
            };
            let result = sweep(&cfg, &spec)?;
            write_sweep(&out, &result)?;
            let skipped = result.summary.rows.iter().filter(|r| r.status != "ok").count();
            eprintln!("wrote {} runs to {} ({} skipped)", result.summary.rows.len() - skipped, out.display(), skipped);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
