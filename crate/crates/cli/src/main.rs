use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use beamkm::bench::{self, ExperimentConfig};
use beamkm::dmo::{brute_force_bqp, solve_bqp, BqpInstance, DmoOptions};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "beamkm", version, about = "Kolmogorov-model beam alignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment; writes results.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Solve one binary quadratic program read from a text file.
    SolveBqp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Dmo)]
        method: Method,
        #[arg(long, default_value_t = DmoOptions::default().eps_acc)]
        eps_acc: f64,
    },
    /// Empirical false-alarm rate of the KS detector on noise-only data.
    CalibrateKs {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time DMO against enumeration on random instances.
    BenchBqp {
        /// Inclusive range `lo..hi` or a comma-separated list.
        #[arg(long, default_value = "2..16")]
        dims: String,
        #[arg(long, default_value_t = 20)]
        per_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Dmo,
    Brute,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().context("range start")?;
        let hi: usize = hi.trim().parse().context("range end")?;
        if lo > hi {
            bail!("empty dimension range {text}");
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',').map(|s| s.trim().parse().with_context(|| format!("bad dimension {s:?}"))).collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    match cli.command {
        Command::Run { config, out, jobs } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::parse(&text)?.with_env_seed()?;
            let records = bench::run_experiment(&cfg, &out, jobs)?;
            let mut w = stdout.lock();
            bench::experiment::write_summary(&bench::summarize(&cfg, &records), &mut w)?;
            eprintln!("{} records written to {}", records.len(), out.display());
        }
        Command::SolveBqp { instance, method, eps_acc } => {
            let text =
                std::fs::read_to_string(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let inst = BqpInstance::parse(&text)?;
            let sol = match method {
                Method::Dmo => solve_bqp(&inst, &DmoOptions { eps_acc, ..DmoOptions::default() })?,
                Method::Brute => brute_force_bqp(&inst)?,
            };
            let mut w = stdout.lock();
            writeln!(w, "psi = {}", sol.psi)?;
            writeln!(w, "objective = {}", sol.objective)?;
            writeln!(w, "upper_bound = {}", sol.upper_bound)?;
            writeln!(w, "iterations = {}", sol.iterations)?;
        }
        Command::CalibrateKs { alpha, l, trials, seed } => {
            bench::calibrate_ks(alpha, l, trials, seed)?.write_csv(stdout.lock())?;
        }
        Command::BenchBqp { dims, per_dim, seed } => {
            let rows = bench::bench_bqp_timing(&parse_dims(&dims)?, per_dim, seed, &DmoOptions::default())?;
            bench::write_timing_csv(&rows, BufWriter::new(stdout.lock()))?;
        }
    }
    Ok(())
}
