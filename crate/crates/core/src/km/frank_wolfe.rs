//! Frank-Wolfe for the simplex-constrained quadratic `min θᵀSθ − 2θᵀv + ρ`.

use nalgebra::{DMatrix, DVector};

use crate::vectors::{BinaryIndicator, SimplexVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LcqpInstance {
    s: DMatrix<f64>,
    v: DVector<f64>,
    rho: f64,
}

impl LcqpInstance {
    pub fn new(s: DMatrix<f64>, v: DVector<f64>, rho: f64) -> Result<Self> {
        let d = v.len();
        if d == 0 || s.nrows() != d || s.ncols() != d {
            return Err(Error::invalid("LCQP needs a square S matching v"));
        }
        let scale = s.amax().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::invalid("LCQP matrix is not symmetric"));
                }
            }
        }
        if s.clone().symmetric_eigenvalues().min() < -1e-9 * scale {
            return Err(Error::invalid("LCQP matrix is not positive semidefinite"));
        }
        if v.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("LCQP linear term must be nonnegative"));
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

    /// `θᵀSθ − 2θᵀv + ρ`.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let t = DVector::from_column_slice(theta);
        t.dot(&(&self.s * &t)) - 2.0 * t.dot(&self.v) + self.rho
    }
}

/// `S = Σ ψψᵀ`, `v = Σ ψ·p`, `ρ = Σ p²` over the receive beams of one row.
pub fn assemble_lcqp(psis: &[BinaryIndicator], p_row: &[f64]) -> Result<LcqpInstance> {
    let d = psis.first().map(BinaryIndicator::dim).ok_or_else(|| Error::invalid("no indicator vectors"))?;
    if psis.len() != p_row.len() {
        return Err(Error::invalid("indicator and probability counts differ"));
    }
    let mut s = DMatrix::zeros(d, d);
    let mut v = DVector::zeros(d);
    for (psi, &p) in psis.iter().zip(p_row) {
        if psi.dim() != d {
            return Err(Error::invalid("indicator vectors have mixed dimensions"));
        }
        let on: Vec<usize> = (0..d).filter(|&k| psi.get(k)).collect();
        for &i in &on {
            v[i] += p;
            for &j in &on {
                s[(i, j)] += 1.0;
            }
        }
    }
    let rho = p_row.iter().map(|p| p * p).sum();
    LcqpInstance::new(s, v, rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Exact line search with away steps.
    AwayLineSearch,
    /// Open-loop `γ_k = 2/(k+2)`, replaced by the exact line-search step
    /// whenever the open-loop step would raise the objective.
    OpenLoop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    pub max_iter: usize,
    pub gap_tol: f64,
    pub step: StepRule,
    /// Keep the objective after every iteration in [`FwOutcome::trace`].
    pub record_trace: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { max_iter: 5000, gap_tol: 1e-8, step: StepRule::AwayLineSearch, record_trace: false }
    }
}

#[derive(Debug, Clone)]
pub struct FwOutcome {
    pub theta: SimplexVector,
    pub objective: f64,
    /// Frank-Wolfe duality gap `∇ᵀ(θ − e_s)` at the returned point.
    pub gap: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Smallest index attaining the minimum (or, with `max`, maximum) of `g` over
/// `idx`.
fn extreme<I: Iterator<Item = usize>>(g: &DVector<f64>, idx: I, max: bool) -> usize {
    let mut best: Option<usize> = None;
    for i in idx {
        let better = match best {
            None => true,
            Some(b) if max => g[i] > g[b],
            Some(b) => g[i] < g[b],
        };
        if better {
            best = Some(i);
        }
    }
    best.expect("nonempty index set")
}

pub fn solve_lcqp_frank_wolfe(inst: &LcqpInstance, init: &SimplexVector, opts: &FwOptions) -> Result<FwOutcome> {
    let d = inst.dim();
    if init.dim() != d {
        return Err(Error::invalid(format!("initial point has dimension {}, expected {d}", init.dim())));
    }
    let s = inst.s();
    let mut theta = DVector::from_column_slice(init.as_slice());
    let mut s_theta = s * &theta;
    let mut obj = theta.dot(&s_theta) - 2.0 * theta.dot(inst.v()) + inst.rho();
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(obj);
    }

    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for k in 0..opts.max_iter {
        let grad = (&s_theta - inst.v()) * 2.0;
        let g_theta = grad.dot(&theta);
        let fw_vertex = extreme(&grad, 0..d, false);
        gap = g_theta - grad[fw_vertex];
        if gap <= opts.gap_tol {
            break;
        }

        // Direction `dir` with step cap `cap`; `slope = −∇ᵀdir > 0`.
        let (dir, cap, slope) = match opts.step {
            StepRule::AwayLineSearch => {
                let away = extreme(&grad, (0..d).filter(|&i| theta[i] > 0.0), true);
                let away_slope = grad[away] - g_theta;
                if gap >= away_slope || theta[away] >= 1.0 {
                    let mut dir = -&theta;
                    dir[fw_vertex] += 1.0;
                    (dir, 1.0, gap)
                } else {
                    let mut dir = theta.clone();
                    dir[away] -= 1.0;
                    (dir, theta[away] / (1.0 - theta[away]), away_slope)
                }
            }
            StepRule::OpenLoop => {
                let mut dir = -&theta;
                dir[fw_vertex] += 1.0;
                (dir, 1.0, gap)
            }
        };

        let s_dir = s * &dir;
        let curvature = dir.dot(&s_dir);
        let exact = if curvature > 0.0 { (slope / (2.0 * curvature)).min(cap) } else { cap };
        let gamma = match opts.step {
            StepRule::AwayLineSearch => exact,
            StepRule::OpenLoop => {
                let open = 2.0 / (k as f64 + 2.0);
                // Along `dir` the objective changes by γ²·curv − γ·slope.
                if open * open * curvature - open * slope <= 0.0 {
                    open
                } else {
                    exact
                }
            }
        };

        let next = &theta + &dir * gamma;
        let s_next = &s_theta + &s_dir * gamma;
        let next_obj = next.dot(&s_next) - 2.0 * next.dot(inst.v()) + inst.rho();
        if next_obj > obj {
            // Rounding noise at the optimum.
            break;
        }
        theta = next;
        s_theta = s_next;
        obj = next_obj;
        iterations = k + 1;
        if opts.record_trace {
            trace.push(obj);
        }
    }

    let theta = if iterations == 0 {
        init.clone()
    } else {
        SimplexVector::from_update(theta.iter().copied().collect())
    };
    let objective = inst.objective(theta.as_slice());
    Ok(FwOutcome { theta, objective, gap, iterations, trace })
}
