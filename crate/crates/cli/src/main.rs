use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmltraj::scenario::{parse_config, run_fig1, run_fig2, ScenarioConfig, ScenarioError};
use cmltraj::verify;

#[derive(Debug, Parser)]
#[command(name = "cmltraj", version, about = "Destination-directed trajectory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML with dotted keys); reference scenario if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo runs (trajectories per model for `fig1`).
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 = one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample CM_L and Markov trajectory bundles to fig1.csv.
    Fig1,
    /// Compare prediction errors, writing fig2.csv and summary.txt.
    Fig2,
    /// Run the oracle and property suites.
    Check,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, ScenarioError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(runs) = cli.runs {
        match cli.command {
            Command::Fig1 => config.fig1_runs = runs,
            _ => config.runs = runs,
        }
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

/// Returns whether every check passed.
fn run(cli: &Cli) -> Result<bool, ScenarioError> {
    let config = load(cli)?;
    match cli.command {
        Command::Fig1 => {
            let (data, path) = run_fig1(&config)?;
            println!(
                "wrote {} ({} trajectories per model)",
                path.display(),
                data.cml.len()
            );
            Ok(true)
        }
        Command::Fig2 => {
            let (data, path) = run_fig2(&config)?;
            println!("wrote {} and summary.txt", path.display());
            println!(
                "AEE({n}|{k}): Markov {:.2}, CM_L {:.2}, ratio {:.2}",
                data.aee_markov.last().copied().unwrap_or(f64::NAN),
                data.aee_cml.last().copied().unwrap_or(f64::NAN),
                data.terminal_ratio(),
                n = config.horizon,
                k = config.measure_until,
            );
            Ok(true)
        }
        Command::Check => {
            let mut reports = verify::algebraic_suites(config.seed)?;
            reports.extend(verify::scenario_suites(&config)?);
            for r in &reports {
                println!("{r}");
            }
            Ok(reports.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cmltraj: some checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("cmltraj: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
