//! Seeded Monte-Carlo harness: experiment configs, the end-to-end alignment
//! trial, solver timing and KS calibration. All outputs are CSV.

pub mod calibrate;
pub mod config;
pub mod experiment;
pub mod timing;

pub use calibrate::{calibrate_ks, CalibrationReport};
pub use config::{EstimatorKind, ExperimentConfig, SolverKind};
pub use experiment::{run_beam_alignment, run_experiment, run_trials, subsample_indices, summarize, TrialRecord};
pub use timing::{bench_bqp_timing, random_bqp_instance, write_timing_csv, TimingRow};
