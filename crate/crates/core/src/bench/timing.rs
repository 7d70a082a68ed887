use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dmo::{brute_force_bqp, solve_bqp, BqpInstance, DmoOptions, BRUTE_FORCE_MAX_DIM};
use crate::rng::child_rng;
use crate::{Error, Result};

/// `S = AᵀA` with standard-normal `A`, `v` entrywise `|N(0, 1)|`, `ρ = vᵀv`.
pub fn random_bqp_instance<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<BqpInstance> {
    let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let s = a.transpose() * &a;
    // Symmetrize exactly; the product is symmetric only up to rounding.
    let s = (&s + s.transpose()) * 0.5;
    let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal).abs());
    let rho = v.norm_squared();
    BqpInstance::new(s, v, rho)
}

/// Instance set for dimension `dim`; depends only on `(seed, dim)`.
pub fn timing_instances(dim: usize, count: usize, seed: u64) -> Result<Vec<BqpInstance>> {
    let mut rng = child_rng(seed, dim as u64, 0);
    (0..count).map(|_| random_bqp_instance(dim, &mut rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub d: usize,
    pub method: &'static str,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Instances whose objective agrees with enumeration within 1e-9.
    pub optimality_matches: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn row(d: usize, method: &'static str, mut times: Vec<f64>, matches: usize) -> TimingRow {
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    TimingRow { d, method, mean_ms, median_ms: median(&times), optimality_matches: matches }
}

/// Times DMO and enumeration on `per_dim` random instances for every `D` in
/// `dims`. Two rows per dimension: `dmo`, then `brute`.
pub fn bench_bqp_timing(dims: &[usize], per_dim: usize, seed: u64, opts: &DmoOptions) -> Result<Vec<TimingRow>> {
    if per_dim == 0 {
        return Err(Error::invalid("need at least one instance per dimension"));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0 || d > BRUTE_FORCE_MAX_DIM) {
        return Err(Error::invalid(format!("dimension {d} outside 1..={BRUTE_FORCE_MAX_DIM}")));
    }
    let mut rows = Vec::with_capacity(2 * dims.len());
    for &d in dims {
        let instances = timing_instances(d, per_dim, seed)?;
        let (mut dmo_ms, mut brute_ms) = (Vec::with_capacity(per_dim), Vec::with_capacity(per_dim));
        let mut matches = 0;
        for inst in &instances {
            let start = Instant::now();
            let dmo = solve_bqp(inst, opts)?;
            dmo_ms.push(start.elapsed().as_secs_f64() * 1e3);
            let start = Instant::now();
            let brute = brute_force_bqp(inst)?;
            brute_ms.push(start.elapsed().as_secs_f64() * 1e3);
            if (dmo.objective - brute.objective).abs() <= 1e-9 {
                matches += 1;
            }
        }
        rows.push(row(d, "dmo", dmo_ms, matches));
        rows.push(row(d, "brute", brute_ms, per_dim));
    }
    Ok(rows)
}

pub fn write_timing_csv<W: Write>(rows: &[TimingRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["d", "method", "mean_ms", "median_ms", "optimality_matches"])?;
    for r in rows {
        wtr.write_record([
            r.d.to_string(),
            r.method.to_string(),
            r.mean_ms.to_string(),
            r.median_ms.to_string(),
            r.optimality_matches.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
