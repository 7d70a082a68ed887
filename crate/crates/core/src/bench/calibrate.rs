use std::io::Write;

use crate::channel::SoundingOutcome;
use crate::estimate::KsDetector;
use num_complex::Complex64;
use crate::rng::seeded;
use crate::{Error, Result};

pub const MIN_CALIBRATION_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub alpha: f64,
    pub l_samples: usize,
    pub empirical_fa: f64,
    pub trials: usize,
}

/// Empirical false-alarm rate of the KS detector: the fraction of noise-only
/// batches of `L` powers whose statistic reaches the threshold.
pub fn calibrate_ks(alpha: f64, l_samples: usize, trials: usize, seed: u64) -> Result<CalibrationReport> {
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::invalid(format!("calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {trials}")));
    }
    let det = KsDetector::new(alpha, l_samples, 1, 1.0)?;
    let mut rng = seeded(seed);
    let mut batch = vec![0.0; l_samples];
    let mut alarms = 0usize;
    for _ in 0..trials {
        for x in batch.iter_mut() {
            *x = SoundingOutcome::observe(Complex64::new(0.0, 0.0), 1.0, &mut rng).power;
        }
        if det.rejects(&batch)? {
            alarms += 1;
        }
    }
    Ok(CalibrationReport { alpha, l_samples, empirical_fa: alarms as f64 / trials as f64, trials })
}

impl CalibrationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["alpha", "L", "empirical_fa", "trials"])?;
        wtr.write_record([
            self.alpha.to_string(),
            self.l_samples.to_string(),
            self.empirical_fa.to_string(),
            self.trials.to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}
