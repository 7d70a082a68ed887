use std::str::FromStr;

use crate::dmo::DmoOptions;
use crate::estimate::{Estimator, FeConfig, KsDetector};
use crate::km::{BcdOptions, BqpMethod};
use crate::{Error, Result};

pub const SEED_ENV: &str = "BEAMKM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Fe,
    Ks,
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fe" => Ok(Self::Fe),
            "ks" => Ok(Self::Ks),
            _ => Err(Error::invalid(format!("unknown estimator {s:?} (expected fe or ks)"))),
        }
    }
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fe => "fe",
            Self::Ks => "ks",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dmo,
    Brute,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dmo" => Ok(Self::Dmo),
            "brute" => Ok(Self::Brute),
            _ => Err(Error::invalid(format!("unknown solver {s:?} (expected dmo or brute)"))),
        }
    }
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dmo => "dmo",
            Self::Brute => "brute",
        }
    }
}

/// One Monte-Carlo experiment. The defaults are the 16×16, D = 8, SR = 25 %
/// KS setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub tx_size: usize,
    pub rx_size: usize,
    pub dim: usize,
    /// Fraction of the pair grid used for training.
    pub sr: f64,
    pub t_fe: usize,
    pub t_ks: usize,
    pub l_samples: usize,
    pub alpha: f64,
    /// FE threshold in dB above the noise power.
    pub tau_db: f64,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub solver: SolverKind,
    pub bcd_iters: usize,
    pub eps_acc: f64,
    /// Draw the training indices at random instead of on a uniform stride.
    pub random_subsample: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_t: 16,
            n_r: 16,
            tx_size: 16,
            rx_size: 16,
            dim: 8,
            sr: 0.25,
            t_fe: 8,
            t_ks: 8,
            l_samples: 5,
            alpha: 0.05,
            tau_db: 12.0,
            snr_db: vec![0.0, 4.0, 8.0, 12.0],
            trials: 100,
            seed: 1,
            estimator: EstimatorKind::Ks,
            solver: SolverKind::Dmo,
            bcd_iters: 10,
            eps_acc: 1.0 - 1e-6,
            random_subsample: false,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config { line, message: format!("cannot parse {key} from {value:?}") })
}

impl ExperimentConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment;
    /// `snr_db` takes a comma-separated list. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut sizes_given = (false, false);
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, got {content:?}") })?;
            match key {
                "n_t" => cfg.n_t = parse_value(line, key, value)?,
                "n_r" => cfg.n_r = parse_value(line, key, value)?,
                "tx_size" => {
                    cfg.tx_size = parse_value(line, key, value)?;
                    sizes_given.0 = true;
                }
                "rx_size" => {
                    cfg.rx_size = parse_value(line, key, value)?;
                    sizes_given.1 = true;
                }
                "dim" | "dim_d" => cfg.dim = parse_value(line, key, value)?,
                "sr" => cfg.sr = parse_value(line, key, value)?,
                "t_fe" => cfg.t_fe = parse_value(line, key, value)?,
                "t_ks" => cfg.t_ks = parse_value(line, key, value)?,
                "l_samples" | "l" => cfg.l_samples = parse_value(line, key, value)?,
                "alpha" => cfg.alpha = parse_value(line, key, value)?,
                "tau_db" => cfg.tau_db = parse_value(line, key, value)?,
                "snr_db" | "snr_db_list" => {
                    cfg.snr_db = value
                        .split(',')
                        .map(|s| parse_value(line, key, s.trim()))
                        .collect::<Result<_>>()?;
                }
                "trials" => cfg.trials = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "estimator" => cfg.estimator = parse_value(line, key, value)?,
                "solver" => cfg.solver = parse_value(line, key, value)?,
                "bcd_iters" => cfg.bcd_iters = parse_value(line, key, value)?,
                "eps_acc" => cfg.eps_acc = parse_value(line, key, value)?,
                "random_subsample" => cfg.random_subsample = parse_value(line, key, value)?,
                _ => return Err(Error::Config { line, message: format!("unknown key {key:?}") }),
            }
        }
        // Codebook sizes follow the antenna counts unless given explicitly.
        if !sizes_given.0 {
            cfg.tx_size = cfg.n_t;
        }
        if !sizes_given.1 {
            cfg.rx_size = cfg.n_r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `BEAMKM_SEED` if it is set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got {s:?}")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_t", self.n_t),
            ("n_r", self.n_r),
            ("tx_size", self.tx_size),
            ("rx_size", self.rx_size),
            ("dim", self.dim),
            ("t_fe", self.t_fe),
            ("t_ks", self.t_ks),
            ("l_samples", self.l_samples),
            ("trials", self.trials),
            ("bcd_iters", self.bcd_iters),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be >= 1")));
        }
        if !(self.sr > 0.0 && self.sr <= 1.0) {
            return Err(Error::invalid(format!("sr must lie in (0, 1], got {}", self.sr)));
        }
        if self.axis_count(self.tx_size) == 0 || self.axis_count(self.rx_size) == 0 {
            return Err(Error::invalid("sampling rate leaves an empty training grid"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.eps_acc > 0.0 && self.eps_acc <= 1.0) {
            return Err(Error::invalid(format!("eps_acc must lie in (0, 1], got {}", self.eps_acc)));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_db must be a nonempty list of finite values"));
        }
        if !self.tau_db.is_finite() {
            return Err(Error::invalid("tau_db must be finite"));
        }
        Ok(())
    }

    /// Per-axis rate `√SR`, so the product grid keeps the fraction `SR`.
    pub fn sr_axis(&self) -> f64 {
        self.sr.sqrt()
    }

    fn axis_count(&self, full: usize) -> usize {
        (full as f64 * self.sr_axis()).round() as usize
    }

    pub fn estimator_for(&self, noise_var: f64) -> Result<Estimator> {
        Ok(match self.estimator {
            EstimatorKind::Fe => Estimator::Fe(FeConfig::new(self.tau_db, self.t_fe)?),
            EstimatorKind::Ks => Estimator::Ks(KsDetector::new(self.alpha, self.l_samples, self.t_ks, noise_var)?),
        })
    }

    pub fn bcd_options(&self) -> BcdOptions {
        let bqp = match self.solver {
            SolverKind::Dmo => BqpMethod::Dmo(DmoOptions { eps_acc: self.eps_acc, ..DmoOptions::default() }),
            SolverKind::Brute => BqpMethod::Brute,
        };
        BcdOptions { sweeps: self.bcd_iters, bqp, ..BcdOptions::new(self.dim) }
    }
}
