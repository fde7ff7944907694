use crate::error::CliError;
use crate::{Cli, Command};
use pvwind::econ::{evaluate, write_cashflow_csv, CashflowReport, EconConfig, EconSummary, EnergyLedger};
use pvwind::sim::{
    annual_energy, coverage_analysis, monthly_energy, run_dynamic, run_quasi_static_from, Mode, OutputFormat, Scenario, SimOutput,
};
use pvwind::tuning::{run_tuning, TuneConfig, TuneResult};
use pvwind::weather::load_load_csv;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let fmt: OutputFormat = cli.format.into();
    match &cli.command {
        Command::SimulateDynamic { config } => simulate(cli, config, Mode::Dynamic, fmt),
        Command::SimulateHourly { config } => simulate(cli, config, Mode::QuasiStatic, fmt),
        Command::Tune { config } => tune(cli, config, fmt),
        Command::Econ {
            config,
            energy,
            run,
            pv_share,
        } => econ(cli, config, energy.as_deref(), run.as_deref(), *pv_share, fmt),
        Command::Coverage { run_output, load_csv } => coverage(cli, run_output, load_csv, fmt),
    }
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("config error in {}: {e}", path.display())))
}

fn output_path(cli: &Cli, stem: &str, fmt: OutputFormat) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::io(&cli.out_dir, e))?;
    Ok(cli.out_dir.join(format!("{stem}.{}", fmt.extension())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn simulate(cli: &Cli, config: &Path, mode: Mode, fmt: OutputFormat) -> Result<(), CliError> {
    let mut scenario: Scenario = read_toml(config)?;
    scenario.mode = mode;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    let (out, stem) = match mode {
        Mode::Dynamic => (run_dynamic(&scenario)?, "dynamic"),
        Mode::QuasiStatic => (run_quasi_static_from(&scenario, config.parent())?, "hourly"),
    };
    let path = output_path(cli, stem, fmt)?;
    out.emit(fmt, &path)?;
    println!("wrote {} ({} samples)", path.display(), out.len());
    match mode {
        Mode::Dynamic => {
            for name in ["pv_power_mw", "wind_power_mw", "total_mw", "v_dc_v", "lambda"] {
                if let Some(v) = out.channel(name).and_then(|c| c.last()) {
                    println!("  final {name:<14} {v:.4}");
                }
            }
        }
        Mode::QuasiStatic => {
            println!("  year month hours     pv_mwh   wind_mwh  total_mwh  peak_mw");
            for m in monthly_energy(&out)? {
                println!(
                    "  {:4} {:5} {:5} {:10.1} {:10.1} {:10.1} {:8.3}",
                    m.year, m.month, m.hours, m.pv_mwh, m.wind_mwh, m.total_mwh, m.peak_total_mw
                );
            }
            let e = annual_energy(&out)?;
            println!("  annualised {:.1} MWh (pv share {:.3})", e.annual_energy(), e.pv_share());
        }
    }
    Ok(())
}

fn tune(cli: &Cli, config: &Path, fmt: OutputFormat) -> Result<(), CliError> {
    let mut cfg: TuneConfig = read_toml(config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let result = run_tuning(&cfg)?;
    let path = output_path(cli, "tune", fmt)?;
    write_tune(&result, fmt, &path)?;
    println!("wrote {}", path.display());
    println!(
        "  kp = {:.6}  ki = {:.6}  mse = {:.6e}  ({} evaluations, seed {})",
        result.gains.kp, result.gains.ki, result.fitness, result.evaluations, result.seed
    );
    Ok(())
}

fn write_tune(result: &TuneResult, fmt: OutputFormat, path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    let res = match fmt {
        OutputFormat::Json => serde_json::to_writer_pretty(&mut w, result).map_err(std::io::Error::from),
        OutputFormat::Csv => (|| {
            writeln!(w, "generation,best_mse")?;
            for (g, f) in result.trace.iter().enumerate() {
                writeln!(w, "{g},{f:e}")?;
            }
            Ok(())
        })(),
    };
    res.and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn econ(
    cli: &Cli,
    config: &Path,
    energy: Option<&str>,
    run: Option<&Path>,
    pv_share: Option<f64>,
    fmt: OutputFormat,
) -> Result<(), CliError> {
    let cfg: EconConfig = read_toml(config)?;
    let ledger = match energy {
        Some("from-run") => {
            let run = match run {
                Some(p) => p.to_path_buf(),
                None => cli.out_dir.join(format!("hourly.{}", fmt.extension())),
            };
            annual_energy(&SimOutput::load(&run)?)?
        }
        Some(text) => {
            let total: f64 = text
                .parse()
                .map_err(|_| CliError::Config(format!("--energy expects MWh or `from-run`, got `{text}`")))?;
            let share = pv_share.or(cfg.energy.map(|e| e.pv_share())).unwrap_or(0.0);
            if !(0.0..=1.0).contains(&share) {
                return Err(CliError::Config(format!("--pv-share {share} outside [0, 1]")));
            }
            EnergyLedger::new(share * total, (1.0 - share) * total)?
        }
        None => cfg
            .energy
            .ok_or_else(|| CliError::Config("no energy given: pass --energy or set [energy] in the config".into()))?,
    };
    cfg.ledger.validate()?;
    cfg.finance.validate()?;
    let (summary, report) = evaluate(&ledger, &cfg.ledger, &cfg.finance, &cfg.emission_factors)?;
    match fmt {
        OutputFormat::Json => {
            let path = output_path(cli, "econ", fmt)?;
            let mut w = create(&path)?;
            serde_json::to_writer_pretty(&mut w, &json!({ "summary": summary, "cashflow": report.rows }))
                .map_err(std::io::Error::from)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(&path, e))?;
            println!("wrote {}", path.display());
        }
        OutputFormat::Csv => {
            let path = output_path(cli, "econ_summary", fmt)?;
            write_summary_csv(&summary, &path)?;
            let flow = output_path(cli, "cashflow", fmt)?;
            write_cashflow(&report, &flow)?;
            println!("wrote {} and {}", path.display(), flow.display());
        }
    }
    print_summary(&summary);
    Ok(())
}

/// Flattens the summary into `metric,value` rows; nested objects become `a.b`.
fn write_summary_csv(summary: &EconSummary, path: &Path) -> Result<(), CliError> {
    fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    flatten(&key, v, rows);
                }
            }
            Value::Null => rows.push((prefix.to_string(), String::new())),
            other => rows.push((prefix.to_string(), other.to_string())),
        }
    }
    let value = serde_json::to_value(summary).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    let mut w = create(path)?;
    let res = (|| {
        writeln!(w, "metric,value")?;
        for (k, v) in &rows {
            writeln!(w, "{k},{v}")?;
        }
        w.flush()
    })();
    res.map_err(|e| CliError::io(path, e))
}

fn write_cashflow(report: &CashflowReport, path: &Path) -> Result<(), CliError> {
    write_cashflow_csv(report, create(path)?).map_err(|e| CliError::io(path, e))
}

fn print_summary(s: &EconSummary) {
    println!("  annual energy   {:.1} MWh (pv share {:.3})", s.annual_energy_mwh, s.pv_share);
    println!("  capital         ${:.0}", s.capital);
    println!("  O&M per year    ${:.0}", s.om_annual);
    println!("  LCOE            {:.4} $/kWh (O&M only {:.4})", s.lcoe, s.lcoe_om_only);
    println!("  NPV             ${:.0}", s.npv);
    match s.payback_simple {
        Some(p) => println!("  payback         {p:.2} years"),
        None => println!("  payback         never"),
    }
    println!("  avoided CO2     {:.0} kg/yr", s.emissions.co2);
}

fn coverage(cli: &Cli, run_output: &Path, load_csv: &Path, fmt: OutputFormat) -> Result<(), CliError> {
    let hybrid = SimOutput::load(run_output)?;
    let load = load_load_csv(load_csv)?;
    let report = coverage_analysis(&hybrid, &load)?;
    let path = output_path(cli, "coverage", fmt)?;
    report.emit(fmt, &path)?;
    let s = report.summary();
    println!(
        "wrote {} ({} hours, {} without reference)",
        path.display(),
        s.hours,
        s.undefined_hours
    );
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.1}%"));
    println!(
        "  coverage min {}  mean {}  max {}  energy {}",
        pct(s.min_pct),
        pct(s.mean_pct),
        pct(s.max_pct),
        pct(s.energy_pct)
    );
    Ok(())
}
