//! Codebooks, rank-1 mmWave channels and noisy beam-pair sounding.
//!
//! Sounding pair `(t, r)` observes `y = w_rᴴ H f_t · s + n` with `s = 1` and
//! `n ~ CN(0, σ²)`; the observed power is `η = |y|²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub type Beam = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

/// A transmit/receive beam index pair. Ordering is lexicographic `(t, r)`,
/// which is the tie-break rule used by every argmax in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BeamPair {
    pub t: usize,
    pub r: usize,
}

impl BeamPair {
    pub fn new(t: usize, r: usize) -> Self {
        Self { t, r }
    }
}

/// An indexed set of unit-norm beams for one side of the link.
#[derive(Debug, Clone)]
pub struct Codebook {
    side: Side,
    beams: Vec<Beam>,
}

impl Codebook {
    /// DFT codebook: beam `k` has entries `exp(i·2π·n·k/size)/√N`.
    pub fn dft(side: Side, antennas: usize, size: usize) -> Result<Self> {
        if antennas == 0 || size == 0 {
            return Err(Error::invalid(format!(
                "DFT codebook needs antennas >= 1 and size >= 1 (got {antennas}, {size})"
            )));
        }
        let scale = 1.0 / (antennas as f64).sqrt();
        let beams = (0..size)
            .map(|k| {
                DVector::from_fn(antennas, |n, _| {
                    // Reduce the phase index modulo `size` before scaling to keep
                    // the angle small and the norm exact.
                    let m = (n * k) % size;
                    Complex64::from_polar(scale, 2.0 * PI * m as f64 / size as f64)
                })
            })
            .collect();
        Ok(Self { side, beams })
    }

    /// Wraps explicit beams after checking they are unit-norm and equally sized.
    pub fn from_beams(side: Side, beams: Vec<Beam>) -> Result<Self> {
        let n = beams.first().map(|b| b.len()).ok_or_else(|| Error::invalid("empty codebook"))?;
        for (i, b) in beams.iter().enumerate() {
            if b.len() != n {
                return Err(Error::invalid(format!("beam {i} has length {}, expected {n}", b.len())));
            }
            if (b.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("beam {i} is not unit-norm")));
            }
        }
        Ok(Self { side, beams })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn antennas(&self) -> usize {
        self.beams[0].len()
    }

    pub fn beam(&self, index: usize) -> &Beam {
        &self.beams[index]
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }
}

/// Half-wavelength ULA response `[1, e^{iπ sinφ}, …, e^{iπ(N−1) sinφ}]/√N`.
pub fn ula_response(antennas: usize, angle: f64) -> Beam {
    let scale = 1.0 / (antennas as f64).sqrt();
    let phase = PI * angle.sin();
    DVector::from_fn(antennas, |n, _| Complex64::from_polar(scale, phase * n as f64))
}

/// Draws a circularly-symmetric complex Gaussian with `E|z|² = var`.
pub fn complex_gaussian<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    pub aod: f64,
    pub aoa: f64,
}

/// One channel realisation with its noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    h: DMatrix<Complex64>,
    path: Option<PathParams>,
    noise_var: f64,
}

impl ChannelInstance {
    /// Single-path channel `√(N_t N_r)·α·a_r(aoa)·a_t(aod)ᴴ` with `α ~ CN(0,1)`
    /// and both angles uniform on `[0, 2π)`.
    pub fn sample<R: Rng + ?Sized>(n_t: usize, n_r: usize, noise_var: f64, rng: &mut R) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::invalid("antenna counts must be positive"));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        let gain = complex_gaussian(1.0, rng);
        let aod = rng.random_range(0.0..2.0 * PI);
        let aoa = rng.random_range(0.0..2.0 * PI);
        Ok(Self::from_path(n_t, n_r, PathParams { gain, aod, aoa }, noise_var))
    }

    pub fn from_path(n_t: usize, n_r: usize, path: PathParams, noise_var: f64) -> Self {
        let a_t = ula_response(n_t, path.aod);
        let a_r = ula_response(n_r, path.aoa);
        let scale = Complex64::from(((n_t * n_r) as f64).sqrt()) * path.gain;
        let h = (a_r * a_t.adjoint()) * scale;
        Self { h, path: Some(path), noise_var }
    }

    /// Arbitrary channel matrix (`N_r × N_t`). A zero `noise_var` gives
    /// noiseless sounding, which is only meaningful for tests and oracles.
    pub fn from_matrix(h: DMatrix<Complex64>, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {noise_var}")));
        }
        Ok(Self { h, path: None, noise_var })
    }

    /// Same channel at a different noise level.
    pub fn with_noise_var(&self, noise_var: f64) -> Self {
        Self { noise_var, ..self.clone() }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn path(&self) -> Option<&PathParams> {
        self.path.as_ref()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    /// Linear SNR `1/σ²`.
    pub fn snr(&self) -> f64 {
        1.0 / self.noise_var
    }

    /// Noiseless combiner output `wᴴ H f`.
    pub fn response(&self, f: &Beam, w: &Beam) -> Result<Complex64> {
        if f.len() != self.n_t() || w.len() != self.n_r() {
            return Err(Error::invalid(format!(
                "beam dimensions ({}, {}) do not match channel {}x{}",
                f.len(),
                w.len(),
                self.n_r(),
                self.n_t()
            )));
        }
        Ok(w.dotc(&(&self.h * f)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoundingOutcome {
    pub y: Complex64,
    pub power: f64,
}

impl SoundingOutcome {
    /// Adds a fresh noise draw to a known noiseless response.
    pub fn observe<R: Rng + ?Sized>(signal: Complex64, noise_var: f64, rng: &mut R) -> Self {
        let y = if noise_var > 0.0 { signal + complex_gaussian(noise_var, rng) } else { signal };
        Self { y, power: y.norm_sqr() }
    }
}

pub fn sound_beam_pair<R: Rng + ?Sized>(
    ch: &ChannelInstance,
    f: &Beam,
    w: &Beam,
    rng: &mut R,
) -> Result<SoundingOutcome> {
    let signal = ch.response(f, w)?;
    Ok(SoundingOutcome::observe(signal, ch.noise_var, rng))
}

/// `|wᴴ H f|² / σ²` (linear).
pub fn beamforming_gain(ch: &ChannelInstance, f: &Beam, w: &Beam) -> Result<f64> {
    Ok(ch.response(f, w)?.norm_sqr() / ch.noise_var)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn check_codebooks(ch: &ChannelInstance, tx: &Codebook, rx: &Codebook) -> Result<()> {
    if tx.is_empty() || rx.is_empty() {
        return Err(Error::invalid("codebooks must be nonempty"));
    }
    if tx.antennas() != ch.n_t() || rx.antennas() != ch.n_r() {
        return Err(Error::invalid("codebook antenna counts do not match the channel"));
    }
    Ok(())
}

/// Noiseless `|w_rᴴ H f_t|²` for every pair, row-major in `t`.
pub fn noiseless_powers(ch: &ChannelInstance, tx: &Codebook, rx: &Codebook) -> Result<Vec<f64>> {
    check_codebooks(ch, tx, rx)?;
    let mut out = Vec::with_capacity(tx.len() * rx.len());
    for f in tx.beams() {
        let hf = ch.matrix() * f;
        out.extend(rx.beams().iter().map(|w| w.dotc(&hf).norm_sqr()));
    }
    Ok(out)
}

/// Index of the first maximum of a row-major `rows × cols` table.
pub(crate) fn lexicographic_argmax(values: &[f64], cols: usize) -> BeamPair {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    BeamPair::new(best / cols, best % cols)
}

/// Noiseless-optimal pair and its beamforming gain.
pub fn genie_best_pair(ch: &ChannelInstance, tx: &Codebook, rx: &Codebook) -> Result<(BeamPair, f64)> {
    let powers = noiseless_powers(ch, tx, rx)?;
    let pair = lexicographic_argmax(&powers, rx.len());
    Ok((pair, powers[pair.t * rx.len() + pair.r] / ch.noise_var))
}

/// Sounds every pair once and returns the pair with the largest observed power.
pub fn exhaustive_search<R: Rng + ?Sized>(
    ch: &ChannelInstance,
    tx: &Codebook,
    rx: &Codebook,
    rng: &mut R,
) -> Result<BeamPair> {
    check_codebooks(ch, tx, rx)?;
    let mut observed = Vec::with_capacity(tx.len() * rx.len());
    for f in tx.beams() {
        let hf = ch.matrix() * f;
        for w in rx.beams() {
            observed.push(SoundingOutcome::observe(w.dotc(&hf), ch.noise_var, rng).power);
        }
    }
    Ok(lexicographic_argmax(&observed, rx.len()))
}
