use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bpr_core::Execution;
use bpr_harness::config::{ConfigError, ExperimentConfig, Overrides, Profile};
use bpr_harness::{dp, pipeline};
use clap::{Parser, Subcommand};

/// Recognize simulated decision makers from their trajectories.
#[derive(Parser)]
#[command(name = "bpr", version)]
struct Cli {
    /// TOML experiment config; defaults to the gridworld-cluster preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scale preset for keys the config leaves unset.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the cohorts of every replication.
    Simulate,
    /// Compute action-space features (FT, FE, PCA+FE, PCA+FT).
    Featurize,
    /// Recover reward vectors with the configured IRL engines.
    Irl,
    /// Cluster or classify every representation.
    Recognize,
    /// Aggregate scores into metrics, plot data and provenance.
    Report,
    /// All stages in order.
    Run,
    /// Exact optimal cutoff for the classical secretary problem.
    DpOracle {
        #[arg(long, default_value_t = 100)]
        applicants: usize,
        /// Also simulate the optimal cutoff on this many random orderings.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let overrides = Overrides {
        seed: cli.seed,
        profile: cli.profile,
        output_dir: cli.out.clone(),
    };
    match &cli.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::default_with(&overrides),
    }
}

fn execution(jobs: Option<usize>) -> Result<Execution> {
    match jobs {
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Command::DpOracle { applicants, samples } = cli.command {
        if applicants < 2 {
            eprintln!("error: --applicants must be at least 2");
            return ExitCode::from(EXIT_CONFIG);
        }
        let oracle = dp::secretary_dp_oracle(applicants);
        let mut out = serde_json::to_value(oracle).expect("serializable");
        if samples > 0 {
            let (hits, n) = dp::simulate_cutoff(applicants, oracle.cutoff, samples, cli.seed.unwrap_or(0));
            out["monte_carlo"] = serde_json::json!({ "samples": n, "successes": hits, "rate": hits as f64 / n as f64 });
        }
        println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        return ExitCode::SUCCESS;
    }

    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match dispatch(&cli.command, &config, cli.jobs) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} metric cells had failed replications; see metrics.csv");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Number of failed metric cells, when the command produces a report.
fn dispatch(command: &Command, config: &ExperimentConfig, jobs: Option<usize>) -> Result<usize> {
    let exec = execution(jobs)?;
    std::fs::create_dir_all(&config.output_dir)?;
    match command {
        Command::Simulate => pipeline::simulate(config, exec)?,
        Command::Featurize => pipeline::featurize(config)?,
        Command::Irl => pipeline::irl(config, exec)?,
        Command::Recognize => pipeline::recognize(config, exec)?,
        Command::Report => return Ok(pipeline::report(config)?.failed_cells()),
        Command::Run => return Ok(pipeline::run_experiment(config, exec)?.failed_cells()),
        Command::DpOracle { .. } => unreachable!("handled before config loading"),
    }
    Ok(0)
}
