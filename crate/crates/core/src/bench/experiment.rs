use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::channel::{exhaustive_search, from_db, noiseless_powers, to_db, ChannelInstance, Codebook, Side};
use crate::estimate::build_training_table;
use crate::km::{bcd_learn, predict, select_beam_pair};
use crate::rng::{child_rng, LANE_CHANNEL, LANE_EXHAUSTIVE, LANE_LEARN, LANE_SOUNDING, LANE_SUBSAMPLE};
use crate::{Error, Result};

/// `round(full · sr_axis)` indices on a uniform stride starting at 0.
pub fn subsample_indices(full: usize, sr_axis: f64) -> Result<Vec<usize>> {
    let count = checked_count(full, sr_axis)?;
    Ok((0..count).map(|k| k * full / count).collect())
}

/// Same count as [`subsample_indices`], drawn uniformly without replacement
/// and returned sorted.
pub fn subsample_indices_random<R: rand::Rng + ?Sized>(full: usize, sr_axis: f64, rng: &mut R) -> Result<Vec<usize>> {
    let count = checked_count(full, sr_axis)?;
    let mut picked = index::sample(rng, full, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn checked_count(full: usize, sr_axis: f64) -> Result<usize> {
    if !(sr_axis > 0.0 && sr_axis <= 1.0) {
        return Err(Error::invalid(format!("per-axis rate must lie in (0, 1], got {sr_axis}")));
    }
    let count = (full as f64 * sr_axis).round() as usize;
    if count == 0 {
        return Err(Error::invalid(format!("rate {sr_axis} selects no index out of {full}")));
    }
    Ok(count.min(full))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub snr_db: f64,
    pub estimator: &'static str,
    pub solver: &'static str,
    pub t_star: usize,
    pub r_star: usize,
    pub gain_db: f64,
    pub genie_gain_db: f64,
    pub exhaustive_gain_db: f64,
    /// Expected `gain_db` of a pair picked uniformly at random: the average of
    /// the per-pair gains in dB over the whole grid.
    pub random_gain_db: f64,
    /// Average linear gain over the whole grid, in dB.
    pub mean_pair_gain_db: f64,
    pub soundings_used: u64,
    pub learn_time_ms: f64,
    pub solve_bqp_time_ms_total: f64,
}

pub const RESULTS_HEADER: [&str; 14] = [
    "trial",
    "snr_db",
    "estimator",
    "solver",
    "t_star",
    "r_star",
    "gain_db",
    "genie_gain_db",
    "exhaustive_gain_db",
    "random_gain_db",
    "mean_pair_gain_db",
    "soundings_used",
    "learn_time_ms",
    "solve_bqp_time_ms_total",
];

/// Columns of `results.csv` that depend on wall-clock time.
pub const TIMING_COLUMNS: [&str; 2] = ["learn_time_ms", "solve_bqp_time_ms_total"];

impl TrialRecord {
    fn csv_fields(&self) -> [String; 14] {
        [
            self.trial.to_string(),
            self.snr_db.to_string(),
            self.estimator.to_string(),
            self.solver.to_string(),
            self.t_star.to_string(),
            self.r_star.to_string(),
            self.gain_db.to_string(),
            self.genie_gain_db.to_string(),
            self.exhaustive_gain_db.to_string(),
            self.random_gain_db.to_string(),
            self.mean_pair_gain_db.to_string(),
            self.soundings_used.to_string(),
            self.learn_time_ms.to_string(),
            self.solve_bqp_time_ms_total.to_string(),
        ]
    }
}

/// One trial at one SNR.
///
/// The channel, training indices and every random stream depend only on
/// `(cfg.seed, trial)`, so all SNR points of a trial see the same channel and
/// the same random streams.
pub fn run_beam_alignment(cfg: &ExperimentConfig, trial: usize, snr_db: f64) -> Result<TrialRecord> {
    cfg.validate()?;
    let key = trial as u64;
    let tx = Codebook::dft(Side::Transmit, cfg.n_t, cfg.tx_size)?;
    let rx = Codebook::dft(Side::Receive, cfg.n_r, cfg.rx_size)?;
    let noise_var = from_db(-snr_db);
    let ch = ChannelInstance::sample(cfg.n_t, cfg.n_r, noise_var, &mut child_rng(cfg.seed, key, LANE_CHANNEL))?;

    let (train_tx, train_rx) = if cfg.random_subsample {
        let mut rng = child_rng(cfg.seed, key, LANE_SUBSAMPLE);
        let t = subsample_indices_random(tx.len(), cfg.sr_axis(), &mut rng)?;
        (t, subsample_indices_random(rx.len(), cfg.sr_axis(), &mut rng)?)
    } else {
        (subsample_indices(tx.len(), cfg.sr_axis())?, subsample_indices(rx.len(), cfg.sr_axis())?)
    };

    let estimator = cfg.estimator_for(noise_var)?;
    let mut sounding = child_rng(cfg.seed, key, LANE_SOUNDING);
    let table = build_training_table(&ch, &tx, &rx, &train_tx, &train_rx, &estimator, &mut sounding)?;

    let start = Instant::now();
    let learned = bcd_learn(&table, &cfg.bcd_options(), &mut child_rng(cfg.seed, key, LANE_LEARN))?;
    let full_tx: Vec<usize> = (0..tx.len()).collect();
    let full_rx: Vec<usize> = (0..rx.len()).collect();
    let pair = select_beam_pair(&predict(&learned.model, &full_tx, &full_rx));
    let learn_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let powers = noiseless_powers(&ch, &tx, &rx)?;
    let gain = |t: usize, r: usize| powers[t * rx.len() + r] / noise_var;
    let genie = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max) / noise_var;
    let exhaustive = exhaustive_search(&ch, &tx, &rx, &mut child_rng(cfg.seed, key, LANE_EXHAUSTIVE))?;
    let n_pairs = powers.len() as f64;
    let random_gain_db = powers.iter().map(|&p| to_db(p / noise_var)).sum::<f64>() / n_pairs;
    let mean_pair_gain = powers.iter().sum::<f64>() / n_pairs / noise_var;

    Ok(TrialRecord {
        trial,
        snr_db,
        estimator: cfg.estimator.name(),
        solver: cfg.solver.name(),
        t_star: pair.t,
        r_star: pair.r,
        gain_db: to_db(gain(pair.t, pair.r)),
        genie_gain_db: to_db(genie),
        exhaustive_gain_db: to_db(gain(exhaustive.t, exhaustive.r)),
        random_gain_db,
        mean_pair_gain_db: to_db(mean_pair_gain),
        soundings_used: table.soundings_used(),
        learn_time_ms,
        solve_bqp_time_ms_total: learned.bqp_time.as_secs_f64() * 1e3,
    })
}

/// Mean gains of one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub mean_gain_db: f64,
    pub mean_exhaustive_gain_db: f64,
    pub mean_genie_gain_db: f64,
    pub mean_learn_time_ms: f64,
}

/// Averages the records per SNR, in the order of `cfg.snr_db`.
pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Vec<SummaryRow> {
    cfg.snr_db
        .iter()
        .map(|&snr| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.snr_db == snr).collect();
            let mean = |f: fn(&TrialRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
            SummaryRow {
                snr_db: snr,
                mean_gain_db: mean(|r| r.gain_db),
                mean_exhaustive_gain_db: mean(|r| r.exhaustive_gain_db),
                mean_genie_gain_db: mean(|r| r.genie_gain_db),
                mean_learn_time_ms: mean(|r| r.learn_time_ms),
            }
        })
        .collect()
}

pub fn write_results<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RESULTS_HEADER)?;
    for rec in records {
        wtr.write_record(rec.csv_fields())?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["snr_db", "mean_gain_db", "mean_exhaustive_gain_db", "mean_genie_gain_db", "mean_learn_time_ms"])?;
    for row in rows {
        wtr.write_record([
            row.snr_db.to_string(),
            row.mean_gain_db.to_string(),
            row.mean_exhaustive_gain_db.to_string(),
            row.mean_genie_gain_db.to_string(),
            row.mean_learn_time_ms.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Runs every `(trial, snr)` point on up to `jobs` threads and returns the
/// records sorted by trial, then by position in `cfg.snr_db`.
pub fn run_trials(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let points: Vec<(usize, usize)> =
        (0..cfg.trials).flat_map(|t| (0..cfg.snr_db.len()).map(move |s| (t, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::ResourceExhausted(format!("cannot start worker pool: {e}")))?;
    // `collect` on an indexed parallel iterator keeps input order.
    pool.install(|| points.par_iter().map(|&(t, s)| run_beam_alignment(cfg, t, cfg.snr_db[s])).collect())
}

/// Runs the experiment and writes `results.csv` and `summary.csv` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<Vec<TrialRecord>> {
    let records = run_trials(cfg, jobs)?;
    std::fs::create_dir_all(out_dir)?;
    write_results(&records, BufWriter::new(File::create(out_dir.join("results.csv"))?))?;
    write_summary(&summarize(cfg, &records), BufWriter::new(File::create(out_dir.join("summary.csv"))?))?;
    Ok(records)
}
