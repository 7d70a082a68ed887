//! Kolmogorov-model learning: `Pr(pair (t, r) is good) ≈ θ_tᵀψ_r`.
//!
//! [`bcd_learn`] alternates between the two parameter blocks. With every `ψ_r`
//! fixed, each `θ_t` solves a simplex-constrained quadratic ([`frank_wolfe`]);
//! with every `θ_t` fixed, each `ψ_r` solves a binary quadratic program, handed
//! to [`crate::dmo`] or to the brute-force oracle.

pub mod frank_wolfe;

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::BeamPair;
use crate::dmo::{brute_force_bqp, solve_bqp, BqpInstance, DmoOptions};
use crate::estimate::EmpiricalProbTable;
use crate::vectors::{BinaryIndicator, SimplexVector};
use crate::{Error, Result};

pub use frank_wolfe::{assemble_lcqp, solve_lcqp_frank_wolfe, FwOptions, FwOutcome, LcqpInstance, StepRule};

/// `θᵀψ`, clamped onto `[0, 1]` against rounding.
pub fn ker_probability(theta: &SimplexVector, psi: &BinaryIndicator) -> Result<f64> {
    if theta.dim() != psi.dim() {
        return Err(Error::invalid(format!("dimension mismatch: theta {} vs psi {}", theta.dim(), psi.dim())));
    }
    Ok(dot(theta, psi))
}

fn dot(theta: &SimplexVector, psi: &BinaryIndicator) -> f64 {
    let p: f64 = theta.as_slice().iter().zip(psi.bits()).filter(|(_, &b)| b).map(|(x, _)| x).sum();
    p.clamp(0.0, 1.0)
}

/// `S = Σ θθᵀ`, `v = Σ θ·p`, `ρ = Σ p²` over the transmit beams of one column.
pub fn assemble_bqp(thetas: &[SimplexVector], p_col: &[f64]) -> Result<BqpInstance> {
    let d = thetas.first().map(SimplexVector::dim).ok_or_else(|| Error::invalid("no simplex vectors"))?;
    if thetas.len() != p_col.len() {
        return Err(Error::invalid("simplex vector and probability counts differ"));
    }
    let mut s = DMatrix::zeros(d, d);
    let mut v = DVector::zeros(d);
    for (theta, &p) in thetas.iter().zip(p_col) {
        let t = DVector::from_column_slice(theta.as_slice());
        s += &t * t.transpose();
        v += &t * p;
    }
    BqpInstance::new(s, v, p_col.iter().map(|p| p * p).sum())
}

/// Learned parameters, aligned with the training index lists.
#[derive(Debug, Clone, PartialEq)]
pub struct KmModel {
    train_tx: Vec<usize>,
    train_rx: Vec<usize>,
    thetas: Vec<SimplexVector>,
    psis: Vec<BinaryIndicator>,
    dim: usize,
}

impl KmModel {
    pub fn new(
        train_tx: Vec<usize>,
        train_rx: Vec<usize>,
        thetas: Vec<SimplexVector>,
        psis: Vec<BinaryIndicator>,
    ) -> Result<Self> {
        if train_tx.len() != thetas.len() || train_rx.len() != psis.len() {
            return Err(Error::invalid("parameter counts must match the training index sets"));
        }
        let dim = thetas.first().map(SimplexVector::dim).ok_or_else(|| Error::invalid("model has no thetas"))?;
        if thetas.iter().any(|t| t.dim() != dim) || psis.iter().any(|p| p.dim() != dim) {
            return Err(Error::invalid("all parameter vectors must share one dimension"));
        }
        Ok(Self { train_tx, train_rx, thetas, psis, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn train_tx(&self) -> &[usize] {
        &self.train_tx
    }

    pub fn train_rx(&self) -> &[usize] {
        &self.train_rx
    }

    pub fn thetas(&self) -> &[SimplexVector] {
        &self.thetas
    }

    pub fn psis(&self) -> &[BinaryIndicator] {
        &self.psis
    }

    /// `θᵀψ` for training positions `(i, j)`.
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        dot(&self.thetas[i], &self.psis[j])
    }

    /// Squared fitting error `Σ (θ_tᵀψ_r − p_{t,r})²` over the table.
    pub fn objective(&self, table: &EmpiricalProbTable) -> f64 {
        objective(&self.thetas, &self.psis, table)
    }

    /// Writes `kind,index,d,value` rows; `index` is the codebook index.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["kind", "index", "d", "value"])?;
        for (theta, t) in self.thetas.iter().zip(&self.train_tx) {
            for (d, x) in theta.as_slice().iter().enumerate() {
                wtr.write_record(["theta".to_string(), t.to_string(), d.to_string(), x.to_string()])?;
            }
        }
        for (psi, r) in self.psis.iter().zip(&self.train_rx) {
            for (d, &b) in psi.bits().iter().enumerate() {
                wtr.write_record(["psi".to_string(), r.to_string(), d.to_string(), u8::from(b).to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn objective(thetas: &[SimplexVector], psis: &[BinaryIndicator], table: &EmpiricalProbTable) -> f64 {
    let mut total = 0.0;
    for (i, theta) in thetas.iter().enumerate() {
        for (j, psi) in psis.iter().enumerate() {
            let e = dot(theta, psi) - table.p(i, j);
            total += e * e;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BqpMethod {
    Dmo(DmoOptions),
    Brute,
}

impl BqpMethod {
    pub fn solve(&self, inst: &BqpInstance) -> Result<crate::dmo::BqpSolution> {
        match self {
            BqpMethod::Dmo(opts) => solve_bqp(inst, opts),
            BqpMethod::Brute => brute_force_bqp(inst),
        }
    }

    /// `1 − ε`: the relative suboptimality a ψ update may carry.
    fn relative_slack(&self) -> f64 {
        match self {
            BqpMethod::Dmo(opts) => 1.0 - opts.eps_acc,
            BqpMethod::Brute => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub dim: usize,
    pub sweeps: usize,
    pub fw: FwOptions,
    pub bqp: BqpMethod,
    /// Stop once a full sweep lowers the objective by less than this.
    pub early_stop_tol: f64,
}

impl BcdOptions {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sweeps: 10,
            fw: FwOptions::default(),
            bqp: BqpMethod::Dmo(DmoOptions::default()),
            early_stop_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub model: KmModel,
    /// Objective at the start and after every half-sweep (θ, ψ, θ, ψ, …).
    pub objective_trace: Vec<f64>,
    /// For every ψ half-sweep, the total increase the ε-accurate BQP solves are
    /// allowed to cause: `Σ_r (1 − ε)·|μ_r|`.
    pub psi_slack: Vec<f64>,
    pub sweeps: usize,
    pub bqp_solves: usize,
    pub bqp_time: Duration,
}

impl LearnOutcome {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

/// Block-coordinate descent on the squared KM fitting error.
///
/// `ψ` starts i.i.d. Bernoulli(1/2) from `rng` and every `θ` at the simplex
/// barycentre. Each sweep refits all `θ_t` (warm-started) and then all `ψ_r`.
pub fn bcd_learn<R: Rng + ?Sized>(table: &EmpiricalProbTable, opts: &BcdOptions, rng: &mut R) -> Result<LearnOutcome> {
    if table.is_empty() {
        return Err(Error::invalid("training table is empty"));
    }
    if opts.dim == 0 || opts.sweeps == 0 {
        return Err(Error::invalid("KM dimension and sweep count must be >= 1"));
    }
    let (rows, cols, dim) = (table.rows(), table.cols(), opts.dim);

    let mut psis: Vec<BinaryIndicator> =
        (0..cols).map(|_| BinaryIndicator::new((0..dim).map(|_| rng.random_bool(0.5)).collect())).collect();
    let mut thetas = vec![SimplexVector::uniform(dim); rows];

    let mut trace = vec![objective(&thetas, &psis, table)];
    let mut psi_slack = Vec::new();
    let mut bqp_time = Duration::ZERO;
    let mut bqp_solves = 0;
    let mut sweeps = 0;

    for _ in 0..opts.sweeps {
        sweeps += 1;
        let before = *trace.last().unwrap();

        for (i, theta) in thetas.iter_mut().enumerate() {
            let p_row: Vec<f64> = (0..cols).map(|j| table.p(i, j)).collect();
            let inst = assemble_lcqp(&psis, &p_row)?;
            *theta = solve_lcqp_frank_wolfe(&inst, theta, &opts.fw)?.theta;
        }
        trace.push(objective(&thetas, &psis, table));

        let mut slack = 0.0;
        for (j, psi) in psis.iter_mut().enumerate() {
            let p_col: Vec<f64> = (0..rows).map(|i| table.p(i, j)).collect();
            let inst = assemble_bqp(&thetas, &p_col)?;
            let start = Instant::now();
            let sol = opts.bqp.solve(&inst)?;
            bqp_time += start.elapsed();
            bqp_solves += 1;
            slack += opts.bqp.relative_slack() * sol.upper_bound.abs();
            *psi = sol.psi;
        }
        psi_slack.push(slack);
        let after = objective(&thetas, &psis, table);
        trace.push(after);

        if before - after < opts.early_stop_tol {
            break;
        }
    }

    let model = KmModel::new(table.train_tx().to_vec(), table.train_rx().to_vec(), thetas, psis)?;
    Ok(LearnOutcome { model, objective_trace: trace, psi_slack, sweeps, bqp_solves, bqp_time })
}

/// Position in `train` of the training index nearest to `index`; ties go to
/// the smaller training index.
fn nearest_position(train: &[usize], index: usize) -> usize {
    let mut best = 0;
    for (k, &x) in train.iter().enumerate().skip(1) {
        let (dx, db) = (x.abs_diff(index), train[best].abs_diff(index));
        if dx < db || (dx == db && x < train[best]) {
            best = k;
        }
    }
    best
}

/// Predicted probabilities over `full_tx × full_rx`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    tx: Vec<usize>,
    rx: Vec<usize>,
    probs: Vec<f64>,
    trained: Vec<bool>,
}

impl PredictionTable {
    pub fn new(tx: Vec<usize>, rx: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != tx.len() * rx.len() || probs.is_empty() {
            return Err(Error::invalid("prediction table shape mismatch"));
        }
        let trained = vec![false; probs.len()];
        Ok(Self { tx, rx, probs, trained })
    }

    pub fn tx(&self) -> &[usize] {
        &self.tx
    }

    pub fn rx(&self) -> &[usize] {
        &self.rx
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, t: usize, r: usize) -> Option<f64> {
        let i = self.tx.iter().position(|&x| x == t)?;
        let j = self.rx.iter().position(|&x| x == r)?;
        Some(self.probs[i * self.rx.len() + j])
    }

    /// Whether `(t, r)` was a training pair rather than a prediction.
    pub fn is_trained(&self, t: usize, r: usize) -> Option<bool> {
        let i = self.tx.iter().position(|&x| x == t)?;
        let j = self.rx.iter().position(|&x| x == r)?;
        Some(self.trained[i * self.rx.len() + j])
    }

    pub fn predicted_count(&self) -> usize {
        self.trained.iter().filter(|&&t| !t).count()
    }
}

/// Evaluates `θ̂ᵀψ̂` on the full grid. Untrained transmit (receive) indices
/// borrow the parameters of the nearest trained index.
pub fn predict(model: &KmModel, full_tx: &[usize], full_rx: &[usize]) -> PredictionTable {
    let tx_pos: Vec<usize> = full_tx.iter().map(|&t| nearest_position(&model.train_tx, t)).collect();
    let rx_pos: Vec<usize> = full_rx.iter().map(|&r| nearest_position(&model.train_rx, r)).collect();
    let mut probs = Vec::with_capacity(full_tx.len() * full_rx.len());
    let mut trained = Vec::with_capacity(probs.capacity());
    for (&t, &i) in full_tx.iter().zip(&tx_pos) {
        for (&r, &j) in full_rx.iter().zip(&rx_pos) {
            probs.push(model.probability(i, j));
            trained.push(model.train_tx[i] == t && model.train_rx[j] == r);
        }
    }
    PredictionTable { tx: full_tx.to_vec(), rx: full_rx.to_vec(), probs, trained }
}

/// Highest-probability pair; ties go to the lexicographically smallest `(t, r)`.
pub fn select_beam_pair(table: &PredictionTable) -> BeamPair {
    let cols = table.rx.len();
    let mut best: Option<(BeamPair, f64)> = None;
    for (k, &p) in table.probs.iter().enumerate() {
        let pair = BeamPair::new(table.tx[k / cols], table.rx[k % cols]);
        let better = match best {
            None => true,
            Some((bp, bv)) => p > bv || (p == bv && pair < bp),
        };
        if better {
            best = Some((pair, p));
        }
    }
    best.expect("prediction tables are nonempty").0
}
