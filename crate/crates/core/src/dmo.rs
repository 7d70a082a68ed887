//! Discrete monotonic optimization for the binary quadratic subproblem.
//!
//! The subproblem is
//!
//! ```text
//! min_{ψ ∈ {0,1}^D}  ψᵀSψ − 2vᵀψ + ρ          (S ⪰ 0, v ≥ 0)
//! ```
//!
//! Dropping `ρ` and flipping the sign turns it into maximising a difference of
//! two nondecreasing functions over the unit box,
//!
//! ```text
//! max f(ψ) = f⁺(ψ) − f⁻(ψ),   f⁺ = 2vᵀψ + ψᵀS₋ψ,   f⁻ = ψᵀS₊ψ
//! s.t. g(ψ) − h(ψ) ≤ 0,        g = Σψ_d,    h = Σψ_d²,    ψ ∈ [0, 1]^D
//! ```
//!
//! where `S = S₊ − S₋` splits `S` into its positive and negative entries and
//! the constraint holds exactly on the binary points. [`solve_bqp`] runs
//! branch-reduce-and-bound on that form: every iteration shrinks the new boxes
//! without losing any feasible point that could still beat the incumbent value
//! `ν`, bounds each box by `f⁺(b) − f⁻(a)`, probes the rounded-up midpoint of
//! every new box, drops boxes whose bound fell below `ν`, and splits the most
//! promising box along its longest edge. It stops once `ν ≥ ε·μ_max`.
//!
//! [`brute_force_bqp`] enumerates all `2^D` points and is the reference the
//! solver is checked against.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::vectors::BinaryIndicator;
use crate::{Error, Result};

/// Largest dimension [`brute_force_bqp`] will enumerate.
pub const BRUTE_FORCE_MAX_DIM: usize = 24;

/// Slack on the monotone reduction conditions, so that points sitting exactly
/// on `f = ν` survive rounding.
const COND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BqpInstance {
    s: DMatrix<f64>,
    v: DVector<f64>,
    rho: f64,
}

impl BqpInstance {
    /// Checks `S` square, symmetric (1e-12) and PSD (λ_min ≥ −1e-9), `v ≥ 0`
    /// and `ρ ≥ 0`.
    pub fn new(s: DMatrix<f64>, v: DVector<f64>, rho: f64) -> Result<Self> {
        let d = v.len();
        if d == 0 {
            return Err(Error::invalid("BQP dimension must be >= 1"));
        }
        if s.nrows() != d || s.ncols() != d {
            return Err(Error::invalid(format!("S is {}x{}, expected {d}x{d}", s.nrows(), s.ncols())));
        }
        if s.iter().chain(v.iter()).any(|x| !x.is_finite()) || !rho.is_finite() {
            return Err(Error::invalid("BQP data must be finite"));
        }
        let scale = s.amax().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("S is not symmetric at ({i}, {j})")));
                }
            }
        }
        let min_eig = SymmetricEigen::new(s.clone()).eigenvalues.min();
        if min_eig < -1e-9 * scale {
            return Err(Error::invalid(format!("S is not positive semidefinite (min eigenvalue {min_eig})")));
        }
        if let Some(x) = v.iter().find(|&&x| x < 0.0) {
            return Err(Error::invalid(format!("v has a negative entry {x}")));
        }
        if rho < 0.0 {
            return Err(Error::invalid(format!("rho must be nonnegative, got {rho}")));
        }
        Ok(Self { s, v, rho })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `xᵀSx`.
    fn quad(&self, x: &[f64]) -> f64 {
        quad_form(&self.s, x)
    }

    fn lin(&self, x: &[f64]) -> f64 {
        self.v.iter().zip(x).map(|(v, x)| v * x).sum()
    }

    /// The minimisation objective `ψᵀSψ − 2vᵀψ + ρ`.
    pub fn objective(&self, psi: &BinaryIndicator) -> f64 {
        let x = psi.to_f64();
        self.quad(&x) - 2.0 * self.lin(&x) + self.rho
    }

    /// Parses the plain-text instance format: `D`, then `D` rows of `S`, then
    /// `v`, then `ρ`, all whitespace separated. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::invalid(format!("instance is missing {what}")));
        let numbers = |line: &str| -> Result<Vec<f64>> {
            line.split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|e| Error::invalid(format!("bad number {tok:?}: {e}"))))
                .collect()
        };

        let d_line = next("the dimension line")?;
        let d: usize = d_line.parse().map_err(|e| Error::invalid(format!("bad dimension {d_line:?}: {e}")))?;
        let mut s = DMatrix::zeros(d, d);
        for i in 0..d {
            let row = numbers(next(&format!("row {} of S", i + 1))?)?;
            if row.len() != d {
                return Err(Error::invalid(format!("row {} of S has {} entries, expected {d}", i + 1, row.len())));
            }
            for (j, x) in row.into_iter().enumerate() {
                s[(i, j)] = x;
            }
        }
        let v = numbers(next("the v line")?)?;
        if v.len() != d {
            return Err(Error::invalid(format!("v has {} entries, expected {d}", v.len())));
        }
        let rho = numbers(next("the rho line")?)?;
        if rho.len() != 1 {
            return Err(Error::invalid("rho line must hold exactly one number"));
        }
        if lines.next().is_some() {
            return Err(Error::invalid("trailing data after rho"));
        }
        Self::new(s, DVector::from_vec(v), rho[0])
    }

    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut out = format!("{d}\n");
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| self.s[(i, j)].to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let v: Vec<String> = self.v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", v.join(" "));
        let _ = writeln!(out, "{}", self.rho);
        out
    }
}

/// The difference-of-monotone view of a [`BqpInstance`].
///
/// `S` is split entrywise into `S = S₊ − S₋` with `S₊, S₋ ≥ 0`, and
/// `f⁺ = 2vᵀψ + ψᵀS₋ψ`, `f⁻ = ψᵀS₊ψ`. Both are nondecreasing on the
/// nonnegative orthant whatever the signs of `S`. For an entrywise nonnegative
/// `S` (the KM case, `S = Σθθᵀ`) `S₋` vanishes and `f⁻ = ψᵀSψ`.
#[derive(Debug, Clone)]
pub struct DmfInstance<'a> {
    bqp: &'a BqpInstance,
    s_pos: DMatrix<f64>,
    s_neg: DMatrix<f64>,
}

pub fn reformulate(bqp: &BqpInstance) -> DmfInstance<'_> {
    DmfInstance { bqp, s_pos: bqp.s.map(|x| x.max(0.0)), s_neg: bqp.s.map(|x| (-x).max(0.0)) }
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        if x[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..d {
            row += m[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

impl<'a> DmfInstance<'a> {
    pub fn bqp(&self) -> &'a BqpInstance {
        self.bqp
    }

    pub fn dim(&self) -> usize {
        self.bqp.dim()
    }

    pub fn s_pos(&self) -> &DMatrix<f64> {
        &self.s_pos
    }

    pub fn s_neg(&self) -> &DMatrix<f64> {
        &self.s_neg
    }

    pub fn f_plus(&self, x: &[f64]) -> f64 {
        2.0 * self.bqp.lin(x) + quad_form(&self.s_neg, x)
    }

    pub fn f_minus(&self, x: &[f64]) -> f64 {
        quad_form(&self.s_pos, x)
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        x.iter().sum()
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        x.iter().map(|x| x * x).sum()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.f_plus(x) - self.f_minus(x)
    }

    /// `g − h`; zero exactly on binary points of the unit box.
    pub fn constraint(&self, x: &[f64]) -> f64 {
        self.g(x) - self.h(x)
    }

    pub fn value(&self, psi: &BinaryIndicator) -> f64 {
        self.f(&psi.to_f64())
    }
}

/// Axis-aligned box `[lo, hi] ⊆ [0, 1]^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box corners must be nonempty and equally sized"));
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| !(0.0 <= a && a <= b && b <= 1.0)) {
            return Err(Error::invalid("box must satisfy 0 <= lo <= hi <= 1"));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&x, (&a, &b))| a <= x && x <= b)
    }

    /// Whether some coordinate interval holds neither 0 nor 1.
    pub fn has_no_binary_point(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(&a, &b)| a > 0.0 && b < 1.0)
    }

    /// Smallest index of the longest edge, or `None` for a point box.
    pub fn widest_edge(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (d, (a, b)) in self.lo.iter().zip(&self.hi).enumerate() {
            let w = b - a;
            if w > 0.0 && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((d, w));
            }
        }
        best.map(|(d, _)| d)
    }
}

/// Result of [`reduce_box`]. When `discard` is set `reduced` is the input box.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionOutcome {
    pub reduced: SearchBox,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub discard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for Bisection {
    fn default() -> Self {
        Self { tol: 1e-9, max_halvings: 60 }
    }
}

impl Bisection {
    /// Supremum of `{x ∈ [0,1] : holds(x)}` for a predicate that is true on an
    /// initial segment. Returns the upper bracket, so the result never
    /// undershoots the true supremum. `None` when `holds(0)` fails.
    fn sup(&self, holds: impl Fn(f64) -> bool) -> Option<f64> {
        if !holds(0.0) {
            return None;
        }
        if holds(1.0) {
            return Some(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..self.max_halvings {
            if hi - lo <= self.tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }
}

/// Shrinks `bx` to `[a′, b′]` without losing any binary point `ψ ∈ bx` with
/// `f(ψ) ≥ ν`.
///
/// The lower corner moves up coordinate-wise, `a′_d = b_d − α_d(b_d − a_d)`,
/// where `α_d` is the largest step from `b` towards `a` along `e_d` for which the
/// box between `a` and the moved corner could still hold a feasible point of
/// value `ν`; the upper corner then moves down from `a′` towards `b` the same
/// way via `β_d`.
pub fn reduce_box(bx: &SearchBox, nu: f64, dmf: &DmfInstance<'_>, bisect: &Bisection) -> ReductionOutcome {
    let inst = dmf.bqp();
    let dim = bx.dim();
    let (a, b) = (bx.lo(), bx.hi());
    let discard = |alphas, betas| ReductionOutcome { reduced: bx.clone(), alphas, betas, discard: true };

    let g_a = dmf.g(a);
    let fm_a = dmf.f_minus(a);
    let fp_b = dmf.f_plus(b);
    let h_b = dmf.h(b);

    // Moving one coordinate of `b` down by `δ` changes f⁺ by
    // `−δ(2v_d + 2(S₋b)_d) + δ²(S₋)_dd`.
    let sneg_b = dmf.s_neg() * DVector::from_column_slice(b);
    let mut alphas = Vec::with_capacity(dim);
    for d in 0..dim {
        let width = b[d] - a[d];
        let slope = 2.0 * inst.v()[d] + 2.0 * sneg_b[d];
        let curv = dmf.s_neg()[(d, d)];
        let alpha = bisect.sup(|alpha| {
            let step = alpha * width;
            let z = b[d] - step;
            let h_z = h_b - b[d] * b[d] + z * z;
            let fp_z = fp_b - step * slope + step * step * curv;
            g_a - h_z <= COND_TOL && fp_z - fm_a >= nu - COND_TOL
        });
        match alpha {
            Some(alpha) => alphas.push(alpha),
            None => return discard(alphas, Vec::new()),
        }
    }
    let a_new: Vec<f64> = (0..dim).map(|d| (b[d] - alphas[d] * (b[d] - a[d])).clamp(a[d], b[d])).collect();

    let g_an = dmf.g(&a_new);
    let fm_an = dmf.f_minus(&a_new);
    let s_an = dmf.s_pos() * DVector::from_column_slice(&a_new);
    let mut betas = Vec::with_capacity(dim);
    for d in 0..dim {
        let width = b[d] - a_new[d];
        let s_dd = dmf.s_pos()[(d, d)];
        let beta = bisect.sup(|beta| {
            let step = beta * width;
            let g_z = g_an + step;
            let fm_z = fm_an + 2.0 * step * s_an[d] + step * step * s_dd;
            g_z - h_b <= COND_TOL && fp_b - fm_z >= nu - COND_TOL
        });
        match beta {
            Some(beta) => betas.push(beta),
            None => return discard(alphas, betas),
        }
    }
    let b_new: Vec<f64> = (0..dim).map(|d| (a_new[d] + betas[d] * (b[d] - a_new[d])).clamp(a_new[d], b[d])).collect();

    ReductionOutcome { reduced: SearchBox { lo: a_new, hi: b_new }, alphas, betas, discard: false }
}

/// Upper bound `μ = f⁺(hi) − f⁻(lo)` on `f` over the box.
pub fn bound(bx: &SearchBox, dmf: &DmfInstance<'_>) -> f64 {
    dmf.f_plus(bx.hi()) - dmf.f_minus(bx.lo())
}

/// Rounded-up midpoint `⌈(lo + hi)/2⌉`.
pub fn candidate(bx: &SearchBox) -> BinaryIndicator {
    BinaryIndicator::new(bx.lo().iter().zip(bx.hi()).map(|(a, b)| (0.5 * (a + b)).ceil() >= 1.0).collect())
}

/// Splits along the longest edge `j` at its midpoint `c`: the first child keeps
/// `ψ_j ≤ ⌊c⌋`, the second `ψ_j ≥ ⌈c⌉`. Children holding no point are `None`.
pub fn branch(bx: &SearchBox) -> Result<(Option<SearchBox>, Option<SearchBox>)> {
    let j = bx.widest_edge().ok_or(Error::DegenerateBox)?;
    let c = 0.5 * (bx.lo[j] + bx.hi[j]);
    let (floor, ceil) = (c.floor(), c.ceil());

    let low = (bx.lo[j] <= floor).then(|| {
        let mut child = bx.clone();
        child.hi[j] = floor;
        child
    });
    let high = (ceil <= bx.hi[j]).then(|| {
        let mut child = bx.clone();
        child.lo[j] = ceil;
        child
    });
    Ok((low, high))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmoOptions {
    /// Relative accuracy `ε ∈ (0, 1]`; the loop stops once `ν ≥ ε·μ_max`.
    pub eps_acc: f64,
    pub bisect: Bisection,
    pub max_iter: usize,
}

impl Default for DmoOptions {
    fn default() -> Self {
        Self { eps_acc: 1.0 - 1e-6, bisect: Bisection::default(), max_iter: 1 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BqpSolution {
    pub psi: BinaryIndicator,
    /// `ψᵀSψ − 2vᵀψ + ρ`.
    pub objective: f64,
    /// `f(ψ) = 2vᵀψ − ψᵀSψ`.
    pub value: f64,
    /// Largest bound among boxes still open at termination (`value` if none).
    pub upper_bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// No box can beat the incumbent.
    Exhausted,
    /// `ν ≥ ε·μ_max`.
    Accuracy,
}

/// Branch-reduce-and-bound state: boxes awaiting reduction (`pending`), reduced
/// boxes kept with their bounds (`retained`), and the incumbent.
#[derive(Debug, Clone)]
pub struct DmoSolver<'a> {
    dmf: DmfInstance<'a>,
    opts: DmoOptions,
    pending: Vec<SearchBox>,
    retained: Vec<(SearchBox, f64)>,
    incumbent: Option<BinaryIndicator>,
    nu: f64,
    iterations: usize,
}

impl<'a> DmoSolver<'a> {
    pub fn new(inst: &'a BqpInstance, opts: DmoOptions) -> Result<Self> {
        if !(opts.eps_acc > 0.0 && opts.eps_acc <= 1.0) {
            return Err(Error::invalid(format!("eps_acc must lie in (0, 1], got {}", opts.eps_acc)));
        }
        Ok(Self {
            dmf: reformulate(inst),
            opts,
            pending: vec![SearchBox::unit(inst.dim())],
            retained: Vec::new(),
            incumbent: None,
            nu: 0.0,
            iterations: 0,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn incumbent(&self) -> Option<&BinaryIndicator> {
        self.incumbent.as_ref()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Boxes currently alive, retained and pending.
    pub fn active_boxes(&self) -> impl Iterator<Item = &SearchBox> {
        self.retained.iter().map(|(b, _)| b).chain(&self.pending)
    }

    fn best_retained(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, (_, mu)) in self.retained.iter().enumerate() {
            if best.is_none_or(|k| *mu > self.retained[k].1) {
                best = Some(i);
            }
        }
        best
    }

    /// Runs one reduce / bound / probe / discard / branch round.
    pub fn step(&mut self) -> Option<Termination> {
        self.iterations += 1;

        // Reduce and bound the new boxes, probing each one's rounded midpoint.
        // Retained boxes were probed when they were new; their probes cannot
        // beat the current ν.
        let mut best_probe: Option<(BinaryIndicator, f64)> = None;
        for bx in std::mem::take(&mut self.pending) {
            let outcome = reduce_box(&bx, self.nu, &self.dmf, &self.opts.bisect);
            if outcome.discard {
                continue;
            }
            let reduced = outcome.reduced;
            let mu = bound(&reduced, &self.dmf);
            let probe = candidate(&reduced);
            let value = self.dmf.value(&probe);
            if value > self.nu && best_probe.as_ref().is_none_or(|(_, v)| value > *v) {
                best_probe = Some((probe, value));
            }
            if !reduced.is_point() && !reduced.has_no_binary_point() {
                self.retained.push((reduced, mu));
            }
        }
        if let Some((psi, value)) = best_probe {
            self.nu = value;
            self.incumbent = Some(psi);
        }

        let nu = self.nu;
        self.retained.retain(|(_, mu)| *mu >= nu);

        let Some(k) = self.best_retained() else {
            return Some(Termination::Exhausted);
        };
        if nu >= self.opts.eps_acc * self.retained[k].1 {
            return Some(Termination::Accuracy);
        }
        let (bx, _) = self.retained.swap_remove(k);
        // Retained boxes are never points, so branching cannot fail here.
        if let Ok((low, high)) = branch(&bx) {
            self.pending.extend(low);
            self.pending.extend(high);
        }
        None
    }

    fn upper_bound(&self) -> f64 {
        self.retained.iter().map(|(_, mu)| *mu).fold(self.nu, f64::max)
    }

    fn solution(&self) -> BqpSolution {
        let inst = self.dmf.bqp();
        let psi = self.incumbent.clone().unwrap_or_else(|| BinaryIndicator::zeros(inst.dim()));
        BqpSolution {
            objective: inst.objective(&psi),
            value: self.dmf.value(&psi),
            psi,
            upper_bound: self.upper_bound(),
            iterations: self.iterations,
        }
    }

    pub fn solve(mut self) -> Result<BqpSolution> {
        loop {
            if self.step().is_some() {
                return Ok(self.solution());
            }
            if self.iterations >= self.opts.max_iter {
                let sol = self.solution();
                return Err(Error::IterationLimit {
                    iterations: self.iterations,
                    incumbent: sol.psi,
                    value: sol.value,
                    upper_bound: sol.upper_bound,
                });
            }
        }
    }
}

/// Solves the BQP to ε-accuracy by branch-reduce-and-bound.
pub fn solve_bqp(inst: &BqpInstance, opts: &DmoOptions) -> Result<BqpSolution> {
    DmoSolver::new(inst, *opts)?.solve()
}

/// Exhaustive minimiser; ties go to the lexicographically smallest vector.
pub fn brute_force_bqp(inst: &BqpInstance) -> Result<BqpSolution> {
    let d = inst.dim();
    if d > BRUTE_FORCE_MAX_DIM {
        return Err(Error::ResourceExhausted(format!(
            "brute force enumeration limited to D <= {BRUTE_FORCE_MAX_DIM}, got {d}"
        )));
    }
    let mut best = (BinaryIndicator::zeros(d), f64::INFINITY);
    for code in 0..(1u64 << d) {
        let psi = BinaryIndicator::from_code(d, code);
        let obj = inst.objective(&psi);
        if obj < best.1 {
            best = (psi, obj);
        }
    }
    let (psi, objective) = best;
    let value = inst.rho() - objective;
    Ok(BqpSolution { psi, objective, value, upper_bound: value, iterations: 1 << d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn diag_instance(v: &[f64]) -> BqpInstance {
        BqpInstance::new(DMatrix::identity(v.len(), v.len()), DVector::from_row_slice(v), 0.0).unwrap()
    }

    /// `S = AᵀA` with Gaussian `A`, `v = |N(0, 1)|`.
    fn random_instance<R: Rng>(d: usize, rng: &mut R) -> BqpInstance {
        let a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        let v = DVector::<f64>::from_fn(d, |_, _| {
            let x: f64 = StandardNormal.sample(rng);
            x.abs()
        });
        let s = a.transpose() * &a;
        let s = (&s + s.transpose()) * 0.5;
        BqpInstance::new(s, v, rng.random::<f64>()).unwrap()
    }

    fn all_binary(d: usize) -> impl Iterator<Item = BinaryIndicator> {
        (0..(1u64 << d)).map(move |c| BinaryIndicator::from_code(d, c))
    }

    #[test]
    fn instance_validation() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(BqpInstance::new(s, DVector::from_row_slice(&[1.0, 1.0]), 0.0).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(BqpInstance::new(indefinite, DVector::from_row_slice(&[1.0, 1.0]), 0.0).is_err());
        assert!(BqpInstance::new(DMatrix::identity(2, 2), DVector::from_row_slice(&[-0.1, 1.0]), 0.0).is_err());
        assert!(BqpInstance::new(DMatrix::identity(2, 2), DVector::from_row_slice(&[0.1]), 0.0).is_err());
        assert!(BqpInstance::new(DMatrix::identity(1, 1), DVector::from_row_slice(&[0.1]), -1.0).is_err());
    }

    #[test]
    fn dmf_values() {
        let inst = diag_instance(&[0.6, 0.2]);
        let dmf = reformulate(&inst);
        assert!((dmf.f(&[1.0, 0.0]) - 0.2).abs() < 1e-15);
        assert_eq!(dmf.f(&[0.0, 0.0]), 0.0);
        assert!((dmf.constraint(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
        for psi in all_binary(2) {
            assert_eq!(dmf.constraint(&psi.to_f64()), 0.0);
            assert!((dmf.value(&psi) - (inst.rho() - inst.objective(&psi))).abs() < 1e-15);
        }
    }

    #[test]
    fn monotone_parts_are_nondecreasing() {
        let mut rng = seeded(31);
        for _ in 0..50 {
            let d = rng.random_range(1..=6);
            let inst = random_instance(d, &mut rng);
            let dmf = reformulate(&inst);
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let k = rng.random_range(0..d);
            let mut y = x.clone();
            y[k] = x[k] + (1.0 - x[k]) * rng.random::<f64>();
            assert!(dmf.f_plus(&y) >= dmf.f_plus(&x) - 1e-12);
            assert!(dmf.f_minus(&y) >= dmf.f_minus(&x) - 1e-12);
            assert!(dmf.g(&y) >= dmf.g(&x));
            assert!(dmf.h(&y) >= dmf.h(&x));
        }
    }

    #[test]
    fn reduction_keeps_unit_box_at_low_nu() {
        let inst = diag_instance(&[0.6, 0.2]);
        let out = reduce_box(&SearchBox::unit(2), 0.2, &reformulate(&inst), &Bisection::default());
        assert!(!out.discard);
        assert_eq!(out.alphas, vec![1.0, 1.0]);
        assert_eq!(out.betas, vec![1.0, 1.0]);
        assert_eq!(out.reduced, SearchBox::unit(2));
    }

    #[test]
    fn reduction_hand_case() {
        let inst = diag_instance(&[1.0, 0.05]);
        let dmf = reformulate(&inst);
        let out = reduce_box(&SearchBox::unit(2), 1.0, &dmf, &Bisection::default());
        assert!(!out.discard);
        let r = &out.reduced;
        assert!((r.lo()[0] - 0.45).abs() < 1e-3 && r.lo()[1] == 0.0);
        assert!(r.hi()[0] == 1.0 && (r.hi()[1] - 0.8975f64.sqrt()).abs() < 1e-3);
        assert!(r.contains(&[1.0, 0.0]));
        assert!((bound(r, &dmf) - 1.8922).abs() < 1e-3);
    }

    #[test]
    fn reduction_discards_unreachable_nu() {
        let inst = diag_instance(&[0.6, 0.2]);
        let dmf = reformulate(&inst);
        let nu = dmf.f_plus(&[1.0, 1.0]) + 0.1;
        assert!(reduce_box(&SearchBox::unit(2), nu, &dmf, &Bisection::default()).discard);
    }

    #[test]
    fn bound_cases() {
        let inst = diag_instance(&[0.6, 0.2]);
        let dmf = reformulate(&inst);
        assert!((bound(&SearchBox::unit(2), &dmf) - 1.6).abs() < 1e-15);
        for psi in all_binary(2) {
            let x = psi.to_f64();
            let point = SearchBox::new(x.clone(), x.clone()).unwrap();
            assert_eq!(bound(&point, &dmf), dmf.f(&x));
        }
    }

    #[test]
    fn candidate_cases() {
        assert_eq!(candidate(&SearchBox::unit(2)), BinaryIndicator::ones(2));
        assert_eq!(candidate(&SearchBox::new(vec![0.0; 2], vec![0.0; 2]).unwrap()), BinaryIndicator::zeros(2));
        let bx = SearchBox::new(vec![0.45, 0.0], vec![1.0, 0.9474]).unwrap();
        assert_eq!(candidate(&bx), BinaryIndicator::ones(2));
    }

    #[test]
    fn branch_cases() {
        let (m1, m2) = branch(&SearchBox::unit(2)).unwrap();
        assert_eq!(m1.unwrap(), SearchBox::new(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap());
        assert_eq!(m2.unwrap(), SearchBox::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap());

        let bx = SearchBox::new(vec![0.45, 0.0], vec![1.0, 0.9474]).unwrap();
        assert_eq!(bx.widest_edge(), Some(1));
        let (m1, m2) = branch(&bx).unwrap();
        assert_eq!(m1.unwrap(), SearchBox::new(vec![0.45, 0.0], vec![1.0, 0.0]).unwrap());
        assert!(m2.is_none());

        let point = SearchBox::new(vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(branch(&point), Err(Error::DegenerateBox)));
    }

    #[test]
    fn branch_partitions_binary_points() {
        let mut rng = seeded(32);
        for _ in 0..300 {
            let d = rng.random_range(1..=4);
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..d)
                .map(|_| {
                    let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                    // Snap some corners onto {0, 1} so boxes actually hold binary points.
                    let snap = |z: f64| if z < 0.3 { 0.0 } else if z > 0.7 { 1.0 } else { z };
                    let (x, y) = (snap(x), snap(y));
                    (x.min(y), x.max(y))
                })
                .unzip();
            let bx = SearchBox::new(lo, hi).unwrap();
            let Ok((m1, m2)) = branch(&bx) else {
                assert!(bx.is_point());
                continue;
            };
            for psi in all_binary(d) {
                let x = psi.to_f64();
                let in1 = m1.as_ref().is_some_and(|m| m.contains(&x));
                let in2 = m2.as_ref().is_some_and(|m| m.contains(&x));
                assert_eq!(bx.contains(&x), in1 || in2, "box {bx:?} point {psi}");
                assert!(!(in1 && in2));
            }
        }
    }

    #[test]
    fn solver_small_cases() {
        let inst = diag_instance(&[0.6, 0.2]);
        let sol = solve_bqp(&inst, &DmoOptions::default()).unwrap();
        assert_eq!(sol.psi, BinaryIndicator::new(vec![true, false]));
        assert!((sol.value - 0.2).abs() < 1e-15);

        let zero_v = BqpInstance::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]), DVector::zeros(2), 0.3)
            .unwrap();
        let sol = solve_bqp(&zero_v, &DmoOptions::default()).unwrap();
        assert_eq!(sol.psi, BinaryIndicator::zeros(2));
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.objective, 0.3);
    }

    #[test]
    fn solver_rejects_bad_eps() {
        let inst = diag_instance(&[0.6, 0.2]);
        for eps in [0.0, -0.5, 1.5] {
            let opts = DmoOptions { eps_acc: eps, ..DmoOptions::default() };
            assert!(solve_bqp(&inst, &opts).is_err());
        }
    }

    #[test]
    fn solver_iteration_limit_carries_incumbent() {
        let mut rng = seeded(33);
        let inst = random_instance(10, &mut rng);
        let opts = DmoOptions { max_iter: 1, ..DmoOptions::default() };
        match solve_bqp(&inst, &opts) {
            Err(Error::IterationLimit { iterations, incumbent, value, upper_bound }) => {
                assert_eq!(iterations, 1);
                assert_eq!(incumbent.dim(), 10);
                assert!(upper_bound >= value);
            }
            other => panic!("expected iteration limit, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_cases() {
        let sol = brute_force_bqp(&diag_instance(&[0.6, 0.2])).unwrap();
        assert_eq!(sol.psi, BinaryIndicator::new(vec![true, false]));
        assert!((sol.objective + 0.2).abs() < 1e-15);

        let sol = brute_force_bqp(&diag_instance(&[0.4])).unwrap();
        assert_eq!(sol.psi, BinaryIndicator::zeros(1));
        assert_eq!(sol.objective, 0.0);

        let mut rng = seeded(34);
        for d in 1..=6 {
            let base = random_instance(d, &mut rng);
            let big = d as f64 * base.s().amax() + 1.0;
            let inst = BqpInstance::new(base.s().clone(), DVector::from_element(d, big), 0.0).unwrap();
            assert_eq!(brute_force_bqp(&inst).unwrap().psi, BinaryIndicator::ones(d));
        }

        let huge = BqpInstance::new(DMatrix::identity(25, 25), DVector::zeros(25), 0.0).unwrap();
        assert!(matches!(brute_force_bqp(&huge), Err(Error::ResourceExhausted(_))));
    }

    #[test]
    fn brute_force_ties_are_lexicographic() {
        // All four points score 0.
        let inst = BqpInstance::new(DMatrix::zeros(2, 2), DVector::zeros(2), 0.0).unwrap();
        assert_eq!(brute_force_bqp(&inst).unwrap().psi, BinaryIndicator::zeros(2));
        // (0,1) and (1,0) tie at −1; (1,1) scores 0.
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let inst = BqpInstance::new(s, DVector::from_element(2, 1.0), 0.0).unwrap();
        assert_eq!(brute_force_bqp(&inst).unwrap().psi, BinaryIndicator::new(vec![false, true]));
    }

    #[test]
    fn solver_matches_enumeration() {
        let mut rng = seeded(35);
        for i in 0..200 {
            let d = 2 + i % 9;
            let inst = random_instance(d, &mut rng);
            let dmo = solve_bqp(&inst, &DmoOptions::default()).unwrap();
            let brute = brute_force_bqp(&inst).unwrap();
            assert!((dmo.objective - brute.objective).abs() <= 1e-9, "D={d}: {} vs {}", dmo.objective, brute.objective);
        }
    }

    #[test]
    fn solver_terminates_within_budget_and_nu_is_monotone() {
        let mut rng = seeded(36);
        for d in 1..=10 {
            for _ in 0..10 {
                let inst = random_instance(d, &mut rng);
                let mut solver = DmoSolver::new(&inst, DmoOptions::default()).unwrap();
                let budget = 10 * (1usize << d);
                let mut last_nu = solver.nu();
                let done = loop {
                    if let Some(t) = solver.step() {
                        break t;
                    }
                    assert!(solver.nu() >= last_nu);
                    last_nu = solver.nu();
                    assert!(solver.iterations() < budget, "D={d} exceeded {budget} iterations");
                };
                if done == Termination::Accuracy {
                    let opt = brute_force_bqp(&inst).unwrap().value;
                    assert!(solver.nu() >= DmoOptions::default().eps_acc * opt - 1e-12);
                }
                if let Some(psi) = solver.incumbent() {
                    assert_eq!(reformulate(&inst).value(psi), solver.nu());
                }
            }
        }
    }

    #[test]
    fn eps_certificate_with_loose_accuracy() {
        let mut rng = seeded(37);
        for _ in 0..100 {
            let d = rng.random_range(2..=8);
            let inst = random_instance(d, &mut rng);
            let opts = DmoOptions { eps_acc: 0.8, ..DmoOptions::default() };
            let sol = solve_bqp(&inst, &opts).unwrap();
            let opt = brute_force_bqp(&inst).unwrap().value;
            assert!(sol.value >= 0.8 * opt - 1e-12, "value {} optimum {opt}", sol.value);
            assert!(sol.upper_bound >= opt - 1e-12);
        }
    }

    #[test]
    fn minimising_and_maximising_agree() {
        let mut rng = seeded(38);
        for _ in 0..100 {
            let d = rng.random_range(1..=6);
            let inst = random_instance(d, &mut rng);
            let dmf = reformulate(&inst);
            let objs: Vec<f64> = all_binary(d).map(|p| inst.objective(&p)).collect();
            let vals: Vec<f64> = all_binary(d).map(|p| dmf.value(&p)).collect();
            let min = objs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (o, v) in objs.iter().zip(&vals) {
                assert_eq!((o - min).abs() < 1e-12, (v - max).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn instance_text_round_trip() {
        let text = "2\n2 1\n1 1.5\n0.5 0.25\n0.75\n";
        let inst = BqpInstance::parse(text).unwrap();
        assert_eq!(inst.s()[(1, 1)], 1.5);
        assert_eq!(inst.v()[1], 0.25);
        assert_eq!(inst.rho(), 0.75);
        assert_eq!(BqpInstance::parse(&inst.to_text()).unwrap(), inst);

        assert!(BqpInstance::parse("2\n1 0\n0 1\n0.5 0.5\n").is_err());
        assert!(BqpInstance::parse("2\n1 0\n0 1 3\n0.5 0.5\n0\n").is_err());
        assert!(BqpInstance::parse("x\n").is_err());
        assert!(BqpInstance::parse("1\n1\n0.5\n0\n7\n").is_err());
    }

    proptest! {
        #[test]
        fn reduction_is_sound_and_bound_is_valid(seed in any::<u64>(), d in 1usize..=6, nu_frac in 0.0f64..1.2) {
            let mut rng = seeded(seed);
            let inst = random_instance(d, &mut rng);
            let dmf = reformulate(&inst);
            let (lo, hi): (Vec<f64>, Vec<f64>) = (0..d)
                .map(|_| match rng.random_range(0..4) {
                    0 => (0.0, 0.0),
                    1 => (1.0, 1.0),
                    2 => (0.0, 1.0),
                    _ => {
                        let x = rng.random::<f64>();
                        let y = rng.random::<f64>();
                        (x.min(y) * 0.5, 0.5 + x.max(y) * 0.5)
                    }
                })
                .unzip();
            let bx = SearchBox::new(lo, hi).unwrap();
            let opt = brute_force_bqp(&inst).unwrap().value;
            let nu = nu_frac * opt;
            let out = reduce_box(&bx, nu, &dmf, &Bisection::default());
            let contained: Vec<BinaryIndicator> = all_binary(d).filter(|p| bx.contains(&p.to_f64())).collect();
            for psi in &contained {
                if dmf.value(psi) >= nu {
                    prop_assert!(!out.discard, "discarded a box holding {} with f >= nu", psi);
                    prop_assert!(out.reduced.contains(&psi.to_f64()));
                }
                prop_assert!(bound(&bx, &dmf) >= dmf.value(psi) - 1e-12);
            }
            if !out.discard {
                for psi in contained.iter().filter(|p| out.reduced.contains(&p.to_f64())) {
                    prop_assert!(bound(&out.reduced, &dmf) >= dmf.value(psi) - 1e-12);
                }
            }
        }
    }
}
