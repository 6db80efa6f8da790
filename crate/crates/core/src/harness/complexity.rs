//! Wall-clock scaling of the saturation-recovery solvers.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::hint::black_box;
use std::time::Instant;

use crate::channel::{build_channel, random_aoas};
use crate::error::{config_err, Result};
use crate::linearize::saturation::{solve_rank_one, NullSpaceSolver};
use crate::seed;

/// Seconds per solve at one null-space dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTiming {
    pub null_dim: usize,
    /// Matrix route with every null-space dimension flagged (`|S_c| = Nr - U`).
    pub general_s: f64,
    pub rank_one_s: f64,
}

/// Times both solver routes for `Nr = d + users` at each `d` in
/// `null_dims`. Each figure is the best of `batches` batch means, with batch
/// sizes scaled so every batch does roughly `work` multiply-adds.
pub fn time_recovery(
    null_dims: &[usize],
    users: usize,
    batches: usize,
    work: usize,
    seed_value: u64,
) -> Result<Vec<RecoveryTiming>> {
    if batches == 0 || work == 0 {
        return Err(config_err("timing needs at least one batch and positive work"));
    }
    let mut rng = seed::rng(seed_value);
    let mut out = Vec::with_capacity(null_dims.len());
    for &d in null_dims {
        if d == 0 {
            return Err(config_err("null-space dimension must be positive"));
        }
        let nr = d + users;
        let aoas = random_aoas(&mut rng, users, nr)?;
        let ch = build_channel(&aoas, nr)?;
        let p: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        // d distinct antennas spread over the array.
        let set: Vec<usize> = (0..d).map(|i| i * nr / d).collect();

        let mut solver = NullSpaceSolver::new();
        let reps = (work / (d * d * d)).max(4);
        let general_s = best_of(batches, reps, || {
            black_box(solver.solve_general(black_box(&p), &ch.null_basis, black_box(&set), 0.01));
        });
        let reps1 = (work / d).max(16);
        let mut k = 0usize;
        let rank_one_s = best_of(batches, reps1, || {
            k = (k + 1) % nr;
            black_box(solve_rank_one(black_box(&p), &ch.null_basis, black_box(k), 0.01));
        });
        out.push(RecoveryTiming {
            null_dim: d,
            general_s,
            rank_one_s,
        });
    }
    Ok(out)
}

fn best_of<F: FnMut()>(batches: usize, reps: usize, mut f: F) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..batches {
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        best = best.min(start.elapsed().as_secs_f64() / reps as f64);
    }
    best
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(config_err("log-log fit needs two or more positive points"));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(config_err("log-log fit needs distinct x values"));
    }
    Ok(sxy / sxx)
}
