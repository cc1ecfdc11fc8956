use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noma_core::harness::{run_and_write, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "noma", version, about = "Two-user downlink NOMA experiments with blind SIC classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with flat experiment settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Replace one config field, e.g. `--override K=10`. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Classification error versus received SNR, analytical and simulated.
    Fig7,
    /// Sum-rate gain bound versus transmit SNR for the three schedulers.
    Fig8,
    /// Sum-rate gain bound versus the number of observations L.
    Fig9,
    /// Sum-rate gain bound versus the classification error budget.
    Fig10,
    /// Analytical-vs-simulation, optimizer-vs-grid and scheduler-vs-exhaustive checks.
    Validate,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Self::Fig7 => Experiment::Fig7ErrorVsSnr,
            Self::Fig8 => Experiment::Fig8GainVsSnr,
            Self::Fig9 => Experiment::Fig9GainVsL,
            Self::Fig10 => Experiment::Fig10GainVsPt,
            Self::Validate => Experiment::Validate,
        }
    }
}

/// Returns whether every validation check passed (always true for sweeps).
fn run(cli: Cli) -> Result<bool, String> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => String::new(),
    };
    let mut overrides = cli.overrides;
    overrides.push(format!("experiment=\"{}\"", cli.command.experiment().name()));
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = ExperimentConfig::from_toml_with_overrides(&text, &overrides).map_err(|e| e.to_string())?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let (path, report) = run_and_write(&cfg, &cli.out).map_err(|e| e.to_string())?;
    if let Some(report) = &report {
        print!("{}", report.to_text());
    }
    println!("wrote {}", path.display());
    Ok(report.is_none_or(|r| r.passed()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
