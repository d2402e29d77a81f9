use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use owc_lora_sa::error::SimError;
use owc_lora_sa::scenario::parse_scenario;
use owc_lora_sa::sweep::{
    build_adaptive_m_table, parse_results_csv, parse_sweep_spec, run_sweep, to_csv, to_json,
    OutputFormat,
};
use owc_lora_sa::validate::{run_validation, DEFAULT_VALIDATION_SEED};
use owc_lora_sa::{engine, run_simulation};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_STAT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "owc-lora-sa",
    about = "Two-tier multi-rate slotted ALOHA simulator (OWC cells over a LoRa-style uplink)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its throughput statistics.
    Simulate {
        /// Scenario TOML file. An empty file selects the stock defaults.
        scenario: PathBuf,
        /// Write one JSON record per OWC slot to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Expand a sweep spec, simulate every point, and emit a result table.
    Sweep {
        /// Sweep spec TOML file.
        spec: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the spec's output format.
        #[arg(long, value_parser = parse_format)]
        format: Option<OutputFormat>,
        /// Worker threads.
        #[arg(long, default_value_t = num_cpus())]
        workers: usize,
        /// Override the base scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the statistical self-validation suite.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the adaptive-M lookup table from a sweep result CSV.
    AdaptiveM {
        /// Result CSV produced by `sweep`, with an M axis.
        results: PathBuf,
    },
}

fn num_cpus() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format {other:?}, expected csv or json")),
    }
}

fn exit_code_for(err: &SimError) -> u8 {
    match err {
        SimError::Validation(_) => EXIT_VALIDATION,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> Result<u8, SimError> {
    match cli.command {
        Command::Simulate { scenario, trace } => {
            let s = parse_scenario(&scenario)?;
            let stats = match trace {
                Some(path) => {
                    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
                    let mut write_err = None;
                    let stats = engine::run_simulation_traced(&s, |t| {
                        if write_err.is_none() {
                            let line = serde_json::to_string(t).expect("trace serializes");
                            write_err = writeln!(file, "{line}").err();
                        }
                    })?;
                    if let Some(e) = write_err {
                        return Err(e.into());
                    }
                    stats
                }
                None => run_simulation(&s)?,
            };
            println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            Ok(0)
        }
        Command::Sweep { spec, out, format, workers, seed } => {
            let mut spec = parse_sweep_spec(&spec)?;
            if let Some(seed) = seed {
                spec.base.master_seed = seed;
            }
            if spec.validate {
                let checks = run_validation(DEFAULT_VALIDATION_SEED)?;
                let mut failed = false;
                for c in &checks {
                    eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                    failed |= !c.pass;
                }
                if failed {
                    return Ok(EXIT_STAT_FAILURE);
                }
            }
            let results = run_sweep(&spec, workers.max(1))?;
            let format = format.unwrap_or(spec.output_format);
            let rendered = match format {
                OutputFormat::Csv => to_csv(&results),
                OutputFormat::Json => to_json(&results),
            };
            match out {
                Some(path) => std::fs::write(path, rendered)?,
                None => print!("{rendered}"),
            }
            Ok(0)
        }
        Command::Validate { seed } => {
            let checks = run_validation(seed.unwrap_or(DEFAULT_VALIDATION_SEED))?;
            let mut failed = false;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed |= !c.pass;
            }
            Ok(if failed { EXIT_STAT_FAILURE } else { 0 })
        }
        Command::AdaptiveM { results } => {
            let text = std::fs::read_to_string(&results)?;
            let table = build_adaptive_m_table(&parse_results_csv(&text)?)?;
            print!("{}", table.to_csv());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
