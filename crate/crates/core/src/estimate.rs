//! Empirical "good SNR" probabilities for the training beam pairs.
//!
//! Two estimators fill an [`EmpiricalProbTable`]:
//!
//! * **FE** counts how often the sounded power reaches a fixed threshold `τ`
//!   over `T_FE` slots.
//! * **KS** runs, in each of `T_KS` slots, a one-sample Kolmogorov-Smirnov test of
//!   `L` fresh soundings against the noise-only law `η ~ Exp(σ²)` and counts the
//!   slots in which the noise-only hypothesis is rejected (`Z ≥ ε`).
//!
//! Both estimates therefore live on the lattice `{k/T : k = 0..T}`.

use std::io::Write;

use rand::Rng;

use crate::channel::{Beam, ChannelInstance, Codebook, SoundingOutcome};
use crate::{Error, Result};

/// Threshold-counting configuration. `tau_db` is relative to the noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeConfig {
    pub tau_db: f64,
    pub t_fe: usize,
}

impl FeConfig {
    pub fn new(tau_db: f64, t_fe: usize) -> Result<Self> {
        if t_fe == 0 {
            return Err(Error::invalid("T_FE must be >= 1"));
        }
        if tau_db.is_nan() || tau_db == f64::INFINITY {
            return Err(Error::invalid(format!("invalid FE threshold {tau_db} dB")));
        }
        Ok(Self { tau_db, t_fe })
    }

    /// `τ` in linear power units for noise level `noise_var`.
    pub fn tau_linear(&self, noise_var: f64) -> f64 {
        noise_var * 10f64.powf(self.tau_db / 10.0)
    }
}

/// Kolmogorov-Smirnov detector against the noise-only hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsDetector {
    l_samples: usize,
    alpha: f64,
    epsilon: f64,
    t_ks: usize,
    noise_var: f64,
}

impl KsDetector {
    pub fn new(alpha: f64, l_samples: usize, t_ks: usize, noise_var: f64) -> Result<Self> {
        let epsilon = ks_threshold(alpha, l_samples)?;
        if t_ks == 0 {
            return Err(Error::invalid("T_KS must be >= 1"));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        Ok(Self { l_samples, alpha, epsilon, t_ks, noise_var })
    }

    pub fn l_samples(&self) -> usize {
        self.l_samples
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_ks(&self) -> usize {
        self.t_ks
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Whether one batch of `L` powers rejects the noise-only hypothesis.
    pub fn rejects(&self, samples: &[f64]) -> Result<bool> {
        Ok(ks_statistic(samples, self.noise_var)? >= self.epsilon)
    }
}

/// Noise-only power CDF `F(x | H₀) = 1 − exp(−x/σ²)`.
pub fn h0_cdf(x: f64, noise_var: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("power must be nonnegative, got {x}")));
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
    }
    Ok(-(-x / noise_var).exp_m1())
}

/// Exact one-sample KS distance `sup_x |F_L(x) − F(x|H₀)|`.
pub fn ks_statistic(samples: &[f64], noise_var: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS statistic needs at least one sample"));
    }
    let mut u = samples.iter().map(|&x| h0_cdf(x, noise_var)).collect::<Result<Vec<_>>>()?;
    Ok(ks_statistic_uniform(&mut u))
}

/// KS distance of values already mapped through the null CDF, i.e. the
/// distance between their ECDF and the uniform CDF on `[0, 1]`. Sorts `u`.
pub fn ks_statistic_uniform(u: &mut [f64]) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let mut z = 0.0f64;
    for (i, &f) in u.iter().enumerate() {
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        z = z.max(above).max(below);
    }
    z.clamp(0.0, 1.0)
}

/// Threshold `ε = √(−ln(α/2) / 2L)` from the Kolmogorov tail approximation
/// `Pr(Z ≥ ε | H₀) ≈ 2·exp(−2Lε²)`.
pub fn ks_threshold(alpha: f64, l_samples: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid(format!("false-alarm rate must lie in (0, 2), got {alpha}")));
    }
    if l_samples == 0 {
        return Err(Error::invalid("L must be >= 1"));
    }
    Ok((-(alpha / 2.0).ln() / (2.0 * l_samples as f64)).sqrt())
}

/// Fraction of `values` that are `>= threshold`.
pub fn fraction_at_least(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v >= threshold).count() as f64 / values.len() as f64
}

fn ks_estimate_signal<R: Rng + ?Sized>(signal: num_complex::Complex64, det: &KsDetector, rng: &mut R) -> f64 {
    let mut batch = vec![0.0; det.l_samples];
    let mut hits = 0usize;
    for _ in 0..det.t_ks {
        for x in batch.iter_mut() {
            *x = SoundingOutcome::observe(signal, det.noise_var, rng).power;
        }
        let mut u: Vec<f64> = batch.iter().map(|&x| -(-x / det.noise_var).exp_m1()).collect();
        if ks_statistic_uniform(&mut u) >= det.epsilon {
            hits += 1;
        }
    }
    hits as f64 / det.t_ks as f64
}

fn fe_estimate_signal<R: Rng + ?Sized>(
    signal: num_complex::Complex64,
    noise_var: f64,
    cfg: &FeConfig,
    rng: &mut R,
) -> f64 {
    let tau = cfg.tau_linear(noise_var);
    let hits = (0..cfg.t_fe).filter(|_| SoundingOutcome::observe(signal, noise_var, rng).power >= tau).count();
    hits as f64 / cfg.t_fe as f64
}

/// KS-estimated probability for one pair; consumes `T_KS · L` soundings, each
/// slot on fresh samples. The detector's `σ²` is used for both the noise draws
/// and the null CDF.
pub fn ks_estimate_pair<R: Rng + ?Sized>(
    ch: &ChannelInstance,
    f: &Beam,
    w: &Beam,
    det: &KsDetector,
    rng: &mut R,
) -> Result<f64> {
    let signal = ch.response(f, w)?;
    Ok(ks_estimate_signal(signal, det, rng))
}

/// FE-estimated probability for one pair; consumes `T_FE` soundings.
pub fn fe_estimate_pair<R: Rng + ?Sized>(
    ch: &ChannelInstance,
    f: &Beam,
    w: &Beam,
    cfg: &FeConfig,
    rng: &mut R,
) -> Result<f64> {
    let signal = ch.response(f, w)?;
    Ok(fe_estimate_signal(signal, ch.noise_var(), cfg, rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Fe(FeConfig),
    Ks(KsDetector),
}

impl Estimator {
    pub fn soundings_per_pair(&self) -> u64 {
        match self {
            Estimator::Fe(cfg) => cfg.t_fe as u64,
            Estimator::Ks(det) => (det.t_ks * det.l_samples) as u64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Fe(_) => "fe",
            Estimator::Ks(_) => "ks",
        }
    }
}

/// Empirical probabilities over `train_tx × train_rx`, stored row-major by
/// position in the two index lists.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProbTable {
    train_tx: Vec<usize>,
    train_rx: Vec<usize>,
    probs: Vec<f64>,
    soundings_per_pair: u64,
}

impl EmpiricalProbTable {
    pub fn new(train_tx: Vec<usize>, train_rx: Vec<usize>, probs: Vec<f64>, soundings_per_pair: u64) -> Result<Self> {
        if probs.len() != train_tx.len() * train_rx.len() {
            return Err(Error::invalid(format!(
                "table has {} entries, expected {}x{}",
                probs.len(),
                train_tx.len(),
                train_rx.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { train_tx, train_rx, probs, soundings_per_pair })
    }

    pub fn train_tx(&self) -> &[usize] {
        &self.train_tx
    }

    pub fn train_rx(&self) -> &[usize] {
        &self.train_rx
    }

    pub fn rows(&self) -> usize {
        self.train_tx.len()
    }

    pub fn cols(&self) -> usize {
        self.train_rx.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability at row `i`, column `j` (positions, not codebook indices).
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.train_rx.len() + j]
    }

    /// Probability for codebook pair `(t, r)` if it is in the training set.
    pub fn get(&self, t: usize, r: usize) -> Option<f64> {
        let i = self.train_tx.iter().position(|&x| x == t)?;
        let j = self.train_rx.iter().position(|&x| x == r)?;
        Some(self.p(i, j))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn soundings_per_pair(&self) -> u64 {
        self.soundings_per_pair
    }

    pub fn soundings_used(&self) -> u64 {
        self.soundings_per_pair * self.probs.len() as u64
    }

    /// Writes `t,r,p,soundings`, one row per training pair.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "r", "p", "soundings"])?;
        for (i, &t) in self.train_tx.iter().enumerate() {
            for (j, &r) in self.train_rx.iter().enumerate() {
                wtr.write_record([
                    t.to_string(),
                    r.to_string(),
                    self.p(i, j).to_string(),
                    self.soundings_per_pair.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Sounds every training pair with the chosen estimator.
pub fn build_training_table<R: Rng + ?Sized>(
    ch: &ChannelInstance,
    tx: &Codebook,
    rx: &Codebook,
    train_tx: &[usize],
    train_rx: &[usize],
    estimator: &Estimator,
    rng: &mut R,
) -> Result<EmpiricalProbTable> {
    if train_tx.is_empty() || train_rx.is_empty() {
        return Err(Error::invalid("training index sets must be nonempty"));
    }
    if let Some(&t) = train_tx.iter().find(|&&t| t >= tx.len()) {
        return Err(Error::invalid(format!("transmit index {t} out of range (codebook size {})", tx.len())));
    }
    if let Some(&r) = train_rx.iter().find(|&&r| r >= rx.len()) {
        return Err(Error::invalid(format!("receive index {r} out of range (codebook size {})", rx.len())));
    }
    let mut probs = Vec::with_capacity(train_tx.len() * train_rx.len());
    for &t in train_tx {
        for &r in train_rx {
            let signal = ch.response(tx.beam(t), rx.beam(r))?;
            let p = match estimator {
                Estimator::Fe(cfg) => fe_estimate_signal(signal, ch.noise_var(), cfg, rng),
                Estimator::Ks(det) => ks_estimate_signal(signal, det, rng),
            };
            probs.push(p);
        }
    }
    EmpiricalProbTable::new(train_tx.to_vec(), train_rx.to_vec(), probs, estimator.soundings_per_pair())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Side;
    use crate::rng::seeded;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn zero_channel(n: usize, noise_var: f64) -> ChannelInstance {
        ChannelInstance::from_matrix(DMatrix::zeros(n, n), noise_var).unwrap()
    }

    #[test]
    fn null_cdf_values() {
        assert_eq!(h0_cdf(0.0, 2.0).unwrap(), 0.0);
        assert!((h0_cdf(2.0 * 2f64.ln(), 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((h0_cdf(3.0 * 0.7, 0.7).unwrap() - 0.950212931632136).abs() < 1e-12);
        assert!(h0_cdf(-1.0, 1.0).is_err());
        assert!(h0_cdf(1.0, 0.0).is_err());
    }

    #[test]
    fn ks_statistic_hand_cases() {
        // F(x0) = 0.3 ⇒ x0 = −ln(0.7).
        let x0 = -(0.7f64).ln();
        assert!((ks_statistic(&[x0], 1.0).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(ks_statistic(&[0.0; 4], 1.0).unwrap(), 1.0);
        assert!(ks_statistic(&[], 1.0).is_err());
        assert!(ks_statistic(&[1.0, -0.5], 1.0).is_err());
    }

    #[test]
    fn ks_statistic_under_null_is_small() {
        let mut rng = seeded(21);
        let l = 1000;
        let mut zs: Vec<f64> = (0..201)
            .map(|_| {
                let xs: Vec<f64> =
                    (0..l).map(|_| SoundingOutcome::observe(Complex64::new(0.0, 0.0), 1.0, &mut rng).power).collect();
                ks_statistic(&xs, 1.0).unwrap()
            })
            .collect();
        zs.sort_by(f64::total_cmp);
        let median = zs[100];
        assert!(median < 1.36 / (l as f64).sqrt() * 1.5, "median Z = {median}");
    }

    #[test]
    fn threshold_values() {
        // Reference values from a 30-digit evaluation of the closed form.
        assert!((ks_threshold(0.05, 5).unwrap() - 0.607_361_461_908_305_2).abs() < 1e-12);
        assert!((ks_threshold(0.05, 50).unwrap() - 0.192_064_558_263_984_15).abs() < 1e-12);
        assert!((ks_threshold(2.0 * (-2.0f64).exp(), 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(ks_threshold(2.0, 5).is_err());
        assert!(ks_threshold(0.0, 5).is_err());
        assert!(ks_threshold(0.05, 0).is_err());
    }

    #[test]
    fn detector_invariants() {
        let det = KsDetector::new(0.05, 5, 8, 0.5).unwrap();
        let eps = (-(0.025f64).ln() / 10.0).sqrt();
        assert!((det.epsilon() - eps).abs() < 1e-12);
        assert!(det.epsilon() > 0.0);
        assert!(KsDetector::new(0.05, 5, 0, 0.5).is_err());
        assert!(KsDetector::new(0.05, 5, 8, 0.0).is_err());
        assert!(FeConfig::new(12.0, 0).is_err());
    }

    #[test]
    fn ks_false_alarms_on_null_pairs() {
        let ch = zero_channel(4, 1.0);
        let cb = Codebook::dft(Side::Transmit, 4, 4).unwrap();
        let det = KsDetector::new(0.05, 50, 8, 1.0).unwrap();
        let mut rng = seeded(22);
        let mean = (0..500).map(|_| ks_estimate_pair(&ch, cb.beam(0), cb.beam(0), &det, &mut rng).unwrap()).sum::<f64>()
            / 500.0;
        assert!(mean <= 0.10, "mean false-alarm estimate {mean}");
    }

    #[test]
    fn ks_strong_signal_always_detected() {
        let cb = Codebook::dft(Side::Transmit, 4, 4).unwrap();
        let h = cb.beam(0) * cb.beam(0).adjoint() * Complex64::new(1e3, 0.0);
        let ch = ChannelInstance::from_matrix(h, 1.0).unwrap();
        let det = KsDetector::new(0.05, 5, 8, 1.0).unwrap();
        let mut rng = seeded(23);
        for _ in 0..20 {
            assert_eq!(ks_estimate_pair(&ch, cb.beam(0), cb.beam(0), &det, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn threshold_comparisons_are_inclusive() {
        let eps = 0.607;
        assert_eq!(fraction_at_least(&[eps; 8], eps), 1.0);
        let tau = 2.0;
        assert!((fraction_at_least(&[2.0 * tau, tau / 2.0, 3.0 * tau], tau) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fraction_at_least(&[tau], tau), 1.0);
    }

    #[test]
    fn fe_zero_threshold_always_fires() {
        let ch = zero_channel(4, 1.0);
        let cb = Codebook::dft(Side::Transmit, 4, 4).unwrap();
        let cfg = FeConfig::new(f64::NEG_INFINITY, 8).unwrap();
        assert_eq!(cfg.tau_linear(1.0), 0.0);
        let mut rng = seeded(24);
        assert_eq!(fe_estimate_pair(&ch, cb.beam(1), cb.beam(2), &cfg, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn fe_noise_rarely_crosses_twelve_db() {
        let ch = zero_channel(4, 0.3);
        let cb = Codebook::dft(Side::Transmit, 4, 4).unwrap();
        let cfg = FeConfig::new(12.0, 8).unwrap();
        let mut rng = seeded(25);
        let n = 10_000;
        let mean = (0..n).map(|_| fe_estimate_pair(&ch, cb.beam(0), cb.beam(0), &cfg, &mut rng).unwrap()).sum::<f64>()
            / n as f64;
        // Tail mass exp(−10^1.2) ≈ 1.3e-7 per sounding.
        assert!(mean < 1e-4, "mean p = {mean}");
    }

    #[test]
    fn table_shape_and_budget() {
        let mut rng = seeded(26);
        let ch = ChannelInstance::sample(4, 4, 1.0, &mut rng).unwrap();
        let cb = Codebook::dft(Side::Transmit, 4, 4).unwrap();
        let rb = Codebook::dft(Side::Receive, 4, 4).unwrap();

        let fe0 = Estimator::Fe(FeConfig::new(f64::NEG_INFINITY, 3).unwrap());
        let t = build_training_table(&ch, &cb, &rb, &[0, 2], &[1, 3], &fe0, &mut rng).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.probs().iter().all(|&p| p == 1.0));
        assert_eq!(t.get(2, 3), Some(1.0));
        assert_eq!(t.get(1, 3), None);
        assert_eq!(t.soundings_used(), 12);

        let ks = Estimator::Ks(KsDetector::new(0.05, 5, 8, 1.0).unwrap());
        let all = [0, 1, 2, 3];
        let t = build_training_table(&ch, &cb, &rb, &all, &all, &ks, &mut rng).unwrap();
        assert_eq!(t.soundings_used(), 640);

        assert!(build_training_table(&ch, &cb, &rb, &[4], &[0], &ks, &mut rng).is_err());
        assert!(build_training_table(&ch, &cb, &rb, &[0], &[9], &ks, &mut rng).is_err());
    }

    #[test]
    fn table_csv_layout() {
        let t = EmpiricalProbTable::new(vec![0, 2], vec![1], vec![0.5, 0.25], 8).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,r,p,soundings\n0,1,0.5,8\n2,1,0.25,8\n");
        assert!(EmpiricalProbTable::new(vec![0], vec![0], vec![1.5], 1).is_err());
        assert!(EmpiricalProbTable::new(vec![0], vec![0, 1], vec![0.5], 1).is_err());
    }

    proptest! {
        #[test]
        fn ks_statistic_is_distribution_free(
            xs in proptest::collection::vec(0.0f64..20.0, 1..40),
            noise_var in 0.05f64..5.0,
            scale in 0.1f64..10.0,
        ) {
            let z = ks_statistic(&xs, noise_var).unwrap();
            prop_assert!((0.0..=1.0).contains(&z));
            // Only the multiset of null-CDF values matters.
            let mut u: Vec<f64> = xs.iter().map(|&x| h0_cdf(x, noise_var).unwrap()).collect();
            prop_assert_eq!(z, ks_statistic_uniform(&mut u));
            let scaled: Vec<f64> = xs.iter().map(|&x| x * scale).collect();
            prop_assert!((ks_statistic(&scaled, noise_var * scale).unwrap() - z).abs() < 1e-12);
        }

        #[test]
        fn threshold_is_decreasing(a1 in 1e-6f64..1.9, a2 in 1e-6f64..1.9, l1 in 1usize..500, l2 in 1usize..500) {
            if a1 < a2 {
                prop_assert!(ks_threshold(a1, l1).unwrap() > ks_threshold(a2, l1).unwrap());
            }
            if l1 < l2 {
                prop_assert!(ks_threshold(a1, l1).unwrap() > ks_threshold(a1, l2).unwrap());
            }
        }

        #[test]
        fn estimates_lie_on_the_lattice(seed in any::<u64>(), t_slots in 1usize..10, l in 1usize..8, gain in 0.0f64..3.0) {
            let cb = Codebook::dft(Side::Transmit, 4, 4).unwrap();
            let h = cb.beam(0) * cb.beam(1).adjoint() * Complex64::new(gain, 0.0);
            let ch = ChannelInstance::from_matrix(h, 1.0).unwrap();
            let mut rng = seeded(seed);
            let det = KsDetector::new(0.05, l, t_slots, 1.0).unwrap();
            let fe = FeConfig::new(3.0, t_slots).unwrap();
            for p in [
                ks_estimate_pair(&ch, cb.beam(1), cb.beam(0), &det, &mut rng).unwrap(),
                fe_estimate_pair(&ch, cb.beam(1), cb.beam(0), &fe, &mut rng).unwrap(),
            ] {
                let k = p * t_slots as f64;
                prop_assert!((k - k.round()).abs() < 1e-9 && (0.0..=1.0).contains(&p));
            }
        }
    }
}
