//! Kolmogorov-model (KM) learning for mmWave MIMO beam alignment.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] draws rank-1 mmWave channels, builds DFT codebooks and simulates
//!   noisy beam-pair sounding together with the exhaustive and genie baselines.
//! * [`estimate`] turns soundings into a table of empirical "good SNR"
//!   probabilities, either by threshold counting (FE) or by a Kolmogorov-Smirnov
//!   detector against the noise-only hypothesis.
//! * [`km`] fits the KM factorisation `p ≈ θᵀψ` by block-coordinate descent,
//!   predicts untrained pairs and selects a beam pair.
//! * [`dmo`] solves the binary quadratic subproblem exactly (to ε-accuracy) with
//!   a branch-reduce-and-bound scheme over monotone functions.
//! * [`bench`] is the seeded Monte-Carlo harness behind the `beamkm` CLI.

pub mod bench;
pub mod channel;
pub mod dmo;
pub mod error;
pub mod estimate;
pub mod km;
pub mod rng;
pub mod vectors;

pub use error::{Error, Result};
