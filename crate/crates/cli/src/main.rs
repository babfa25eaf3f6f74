use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freespace::artifact::Format;
use freespace::fitting::ModelKind;

use freespace_cli::commands;
use freespace_cli::error::CliError;

#[derive(Parser)]
#[command(name = "freespace", version, about = "Single-atom free-space coupling: overlap, simulation, fitting")]
struct Cli {
    /// Worker threads for Monte-Carlo and count generation (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the Monte-Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Ideal mode overlap, extinction and saturation power of the optics.
    Overlap {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use this overlap instead of the ideal value for the optics.
        #[arg(long)]
        lambda: Option<f64>,
        /// Also write the report as a table into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Simulate count records and the derived spectra.
    Simulate(RunArgs),
    /// Fit a lineshape model to a data table and write a JSON report.
    Fit {
        /// Table to fit: a transmission/reflection table, a count table, or
        /// any CSV whose first three columns are x, y, sigma.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "transmission")]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit thermally averaged spectra along a recoil-heating schedule.
    HeatingSweep(RunArgs),
    /// Re-run the command recorded in an artifact.
    Replay {
        artifact: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Overlap { config, lambda, out, format } => {
            let cfg = commands::load_config(config.as_deref())?;
            let tables = commands::overlap(&cfg, lambda, format)?;
            commands::print_overlap(&tables[0]);
            if let Some(dir) = out {
                commands::write_all(&dir, &tables)?;
            }
        }
        Command::Simulate(a) => {
            let cfg = commands::load_run_config(a.config.as_deref(), a.seed, a.samples)?;
            let tables = commands::simulate(&cfg, a.format)?;
            commands::write_all(&a.out, &tables)?;
        }
        Command::HeatingSweep(a) => {
            let cfg = commands::load_run_config(a.config.as_deref(), a.seed, a.samples)?;
            let tables = commands::heating_sweep(&cfg, a.format)?;
            commands::write_all(&a.out, &tables)?;
        }
        Command::Fit { data, model, out } => {
            let input = commands::fit_input_from_file(&data, model)?;
            let report = commands::fit(&input)?;
            commands::write_report(&out, &report)?;
            report.into_result()?;
        }
        Command::Replay { artifact, out } => commands::replay(&artifact, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
