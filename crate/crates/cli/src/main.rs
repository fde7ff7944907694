//! `pvwind` command-line front end.

mod commands;
mod error;

use clap::{Parser, Subcommand, ValueEnum};
use pvwind::sim::OutputFormat;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "pvwind", version, about = "Hybrid PV and wind plant simulation, tuning and economics")]
pub struct Cli {
    /// Overrides the seed stored in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving output files; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-domain run of one PV string and one turbine, scaled to the plant.
    SimulateDynamic { config: PathBuf },
    /// Hourly quasi-static run over a weather series.
    SimulateHourly { config: PathBuf },
    /// PSO search for a PI gain pair.
    Tune { config: PathBuf },
    /// LCOE, NPV, payback, cash flow and avoided emissions.
    Econ {
        config: PathBuf,
        /// Annual energy in MWh, or `from-run` to integrate an hourly run.
        #[arg(long)]
        energy: Option<String>,
        /// Hourly run used with `--energy from-run`; defaults to
        /// `<out-dir>/hourly.<format>`.
        #[arg(long)]
        run: Option<PathBuf>,
        /// PV fraction of a numeric `--energy`.
        #[arg(long)]
        pv_share: Option<f64>,
    },
    /// Hour-by-hour share of a reference load met by the plant.
    Coverage { run_output: PathBuf, load_csv: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pvwind: {e}");
            e.exit_code()
        }
    }
}
