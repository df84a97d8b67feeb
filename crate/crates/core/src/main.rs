use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cow_qkd::experiments::{
    self, run_montecarlo_validation, sweep_optimal_intensity, sweep_qber_curves, with_workers,
    AttackSet, LengthRange, OutputFormat, RunMetadata, SweepRow, SweepSpec, ValidationReport,
};
use cow_qkd::{
    active_attack, bs_attack, critical_length, fully_insecure_length, key_rate_margin, Error,
    ProtocolParams,
};

const EXIT_VALIDATION_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "cow-qkd", version, about = "Beam-splitting attack analysis for the COW QKD protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical QBER of the beam-splitting and active attacks versus length.
    QberCurves {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.5])]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        decoy_fraction: f64,
        /// Channel lengths in km as min:max:step.
        #[arg(long, default_value = "0:150:1")]
        length: LengthRange,
        #[arg(long, default_value = "bs,active")]
        attacks: AttackSet,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to json for a .json file, csv otherwise.
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Size of the worker pool; all cores when omitted.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Source intensity maximizing the key-rate margin under the active attack.
    OptimalIntensity {
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        decoy_fraction: f64,
        #[arg(long, default_value = "1:100:1")]
        length: LengthRange,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        format: Option<OutputFormat>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Human-readable analysis of both attacks at one channel length.
    AttackReport {
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        #[arg(long, default_value_t = 0.1)]
        decoy_fraction: f64,
    },
    /// Cross-check the analytic rates against a pulse-level simulation.
    ValidateMc {
        #[arg(long, default_value_t = 0.2)]
        mu: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        #[arg(long, default_value_t = 0.1)]
        decoy_fraction: f64,
        #[arg(long, default_value_t = 1_000_000)]
        pulses: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Serialize)]
struct OptimalIntensityConfig {
    delta: f64,
    decoy_fraction: f64,
    lengths: LengthRange,
    output_path: PathBuf,
    format: OutputFormat,
    workers: Option<usize>,
}

#[derive(Serialize)]
struct WithWorkers<'a, T> {
    #[serde(flatten)]
    inner: &'a T,
    workers: Option<usize>,
}

fn write_table(path: &Path, format: OutputFormat, meta: &RunMetadata, rows: &[SweepRow]) -> cow_qkd::Result<()> {
    match format {
        OutputFormat::Csv => experiments::write_csv(path, meta, rows),
        OutputFormat::Json => experiments::write_json(path, meta, rows),
    }
}

fn run(command: Command) -> cow_qkd::Result<u8> {
    match command {
        Command::QberCurves {
            mu,
            delta,
            decoy_fraction,
            length,
            attacks,
            out,
            format,
            workers,
        } => {
            let format = format.unwrap_or_else(|| OutputFormat::from_path(&out));
            let spec = SweepSpec {
                mu_list: mu,
                delta,
                decoy_fraction,
                lengths: length,
                attacks,
                output_path: out,
                format,
            };
            spec.validate()?;
            let meta = RunMetadata::new(
                "qber-curves",
                &WithWorkers {
                    inner: &spec,
                    workers,
                },
            )?;
            let rows = with_workers(workers, || sweep_qber_curves(&spec))??;
            write_table(&spec.output_path, format, &meta, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), spec.output_path.display());
            Ok(0)
        }
        Command::OptimalIntensity {
            delta,
            decoy_fraction,
            length,
            out,
            format,
            workers,
        } => {
            let format = format.unwrap_or_else(|| OutputFormat::from_path(&out));
            let config = OptimalIntensityConfig {
                delta,
                decoy_fraction,
                lengths: length,
                output_path: out,
                format,
                workers,
            };
            let meta = RunMetadata::new("optimal-intensity", &config)?;
            let rows = with_workers(workers, || sweep_optimal_intensity(delta, decoy_fraction, &length))??;
            write_table(&config.output_path, format, &meta, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), config.output_path.display());
            Ok(0)
        }
        Command::AttackReport {
            mu,
            delta,
            length,
            decoy_fraction,
        } => {
            let params = ProtocolParams::new(mu, decoy_fraction, delta)?;
            print_attack_report(&params, length)?;
            Ok(0)
        }
        Command::ValidateMc {
            mu,
            delta,
            length,
            decoy_fraction,
            pulses,
            seed,
            out,
            workers,
        } => {
            let params = ProtocolParams::new(mu, decoy_fraction, delta)?;
            let report = with_workers(workers, || run_montecarlo_validation(&params, length, pulses, seed))??;
            emit_validation(&report, out.as_deref())?;
            Ok(if report.passed { 0 } else { EXIT_VALIDATION_FAILED })
        }
    }
}

fn print_attack_report(params: &ProtocolParams, length_km: f64) -> cow_qkd::Result<()> {
    let bs = bs_attack(params, length_km)?;
    let active = active_attack(params, length_km)?;
    let plan = active.plan.expect("active attack always carries a plan");
    let c = active.channel;
    println!("# config: mu={} delta={} decoy_fraction={} length_km={}",
        params.mu(), params.delta(), params.decoy_fraction(), length_km);
    println!("critical length        l_crit   = {:.6} km", critical_length(params.delta())?);
    println!("fully insecure from    l        = {:.6} km", fully_insecure_length(params)?);
    println!("Bob's intensity        mu_B     = {:.9}", c.mu_b);
    println!("withdrawable           mu_E^max = {:.9}", c.mu_e_max);
    println!();
    println!("beam-splitting attack");
    println!("  I_AE                          = {:.9}", bs.i_ae);
    println!("  critical QBER                 = {:.9}", bs.qber_critical);
    println!();
    println!("active beam-splitting attack");
    println!("  withdrawn            mu_E*    = {:.9}", plan.mu_e());
    println!("  forwarded            mu_B'    = {:.9}", plan.mu_b_prime());
    println!("  blocked fraction     b        = {:.9}", plan.block_fraction());
    println!("  conclusive (info)             = {:.9}", plan.p_conc_inf());
    println!("  conclusive (decoy)            = {:.9}", plan.p_conc_cont());
    println!("  I_AE                          = {:.9}", active.i_ae);
    println!("  critical QBER                 = {:.9}", active.qber_critical);
    println!("  fully insecure                = {}", active.fully_insecure);
    println!("  key-rate margin               = {:.9}", key_rate_margin(params, length_km)?);
    Ok(())
}

fn emit_validation(report: &ValidationReport, out: Option<&Path>) -> cow_qkd::Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, &text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => print!("{text}"),
    }
    for check in &report.checks {
        eprintln!("{:<40} z = {:>8.3}  {:?}", check.name, check.z, check.status);
    }
    eprintln!("{}", if report.passed { "PASSED" } else { "FAILED" });
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                e if e.is_usage() => EXIT_USAGE,
                Error::InfeasibleBlocking { .. } => EXIT_VALIDATION_FAILED,
                _ => EXIT_IO,
            })
        }
    }
}
