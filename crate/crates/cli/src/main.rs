use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use irs_noma::harness::{emit_results, run_experiment, summarize, ConventionalMode, ExperimentSpec, Method};
use irs_noma::SystemConfig;

#[derive(Parser)]
#[command(name = "irs-noma", version, about = "Energy-efficiency simulator for IRS-aided NOMA beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run paired Monte Carlo trials over an (N, M) grid and write CSVs.
    Simulate(SimulateArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Flat key = value scenario file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// IRS element counts.
    #[arg(long, value_delimiter = ',', default_value = "16,32,48,64")]
    n_grid: Vec<usize>,
    /// BS antenna counts.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    m_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "proposed,conventional,random-clustering,random-pac")]
    methods: Vec<Method>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Experiment seed; defaults to the config's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// time-sharing or single-user.
    #[arg(long, default_value = "time-sharing")]
    conventional_mode: ConventionalMode,
    /// Average trials whose QoS floor was unattainable as well.
    #[arg(long)]
    include_infeasible: bool,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => SystemConfig::from_file(path)?,
        None => SystemConfig::default(),
    };
    let spec = ExperimentSpec {
        n_grid: args.n_grid,
        m_grid: args.m_grid,
        num_trials: args.trials,
        methods: args.methods,
        out_dir: args.out,
        seed: args.seed.unwrap_or(config.rng_seed),
        workers: args.workers,
        conventional_mode: args.conventional_mode,
        include_infeasible: args.include_infeasible,
    };
    let start = Instant::now();
    let records = run_experiment(&config, &spec).context("running trials")?;
    let paths = emit_results(&records, &spec, &config).context("writing results")?;

    let attained = records.iter().filter(|r| r.qos_attained).count();
    eprintln!(
        "{} trials in {:.1} s; QoS floor attainable in {attained}",
        records.len(),
        start.elapsed().as_secs_f64()
    );
    for row in summarize(&records, &spec) {
        let mean = row.mean_ee.map_or_else(|| "NA".into(), |v| format!("{v:.4e}"));
        eprintln!(
            "  {:<18} N={:<3} M={:<3} mean EE {mean:>11}  ({} used, {} infeasible)",
            row.method, row.n, row.m, row.trials, row.infeasible
        );
    }
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
    }
}
