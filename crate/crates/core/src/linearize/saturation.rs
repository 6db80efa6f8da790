//! Null-space assisted saturation recovery.
//!
//! The noiseless array snapshot `x = H s` has no energy in the left null space
//! of `H`. Saturation (and quantization) errors do. For the antennas flagged
//! as saturated, the error is estimated as the regularized least-squares
//! solution
//!
//! ```text
//! n_hat[S_c] = (V^H V + kappa I)^-1 V^H p,    p = N y,  V = N[:, S_c]
//! ```
//!
//! and zero elsewhere, where `N` has orthonormal rows spanning the null space.
//! Because `N^H N` is the null-space projector `P`, the same system can be
//! formed from `P` directly: `V^H V = P[S_c, S_c]` and `V^H p = (P y)[S_c]`.
//! [`ProjectorRecovery`] uses that form; [`saturation_recovery`] follows the
//! definition literally.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hermitian::{solve_hermitian, solve_pinv};
use crate::error::{config_err, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SatRecoveryConfig {
    /// Detection threshold as a fraction of the LNA saturation level.
    pub gamma_ratio: f64,
    /// Tikhonov weight on the saturation-noise estimate.
    pub kappa: f64,
}

impl Default for SatRecoveryConfig {
    fn default() -> Self {
        SatRecoveryConfig {
            gamma_ratio: 0.95,
            kappa: 0.01,
        }
    }
}

impl SatRecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_ratio > 0.0 && self.gamma_ratio <= 1.0) {
            return Err(config_err(format!("gamma ratio {} outside (0, 1]", self.gamma_ratio)));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(config_err(format!("kappa {} must be finite and >= 0", self.kappa)));
        }
        Ok(())
    }

    pub fn threshold(&self, v_max: f64) -> f64 {
        self.gamma_ratio * v_max
    }
}

/// Partition of antenna indices into unsaturated (`S_n`) and flagged (`S_c`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SaturationSets {
    pub unsaturated: Vec<usize>,
    pub saturated: Vec<usize>,
}

/// `S_n = {k : |y_k| < threshold}`, `S_c` its complement.
pub fn detect_saturated_set(y_adc: &[Complex64], threshold: f64) -> SaturationSets {
    let t2 = threshold * threshold;
    let mut sets = SaturationSets::default();
    for (k, v) in y_adc.iter().enumerate() {
        if v.norm_sqr() < t2 {
            sets.unsaturated.push(k);
        } else {
            sets.saturated.push(k);
        }
    }
    sets
}

/// Appends to `out` the indices with `|y_k| >= threshold`.
#[inline]
pub fn detect_into(y_adc: &[Complex64], threshold: f64, out: &mut Vec<usize>) {
    let t2 = threshold * threshold;
    out.clear();
    out.extend(
        y_adc
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() >= t2)
            .map(|(k, _)| k),
    );
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Estimated saturation noise, zero outside `S_c`.
    pub noise_estimate: Vec<Complex64>,
    /// `y_adc - noise_estimate`.
    pub corrected: Vec<Complex64>,
    /// More flagged antennas than null-space dimensions; the estimate is
    /// regularized but not identifiable.
    pub underdetermined: bool,
}

/// Scratch buffers for the matrix route, reusable across samples.
#[derive(Debug, Default, Clone)]
pub struct NullSpaceSolver {
    v: Vec<Complex64>,
    gram: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl NullSpaceSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// General matrix route: gathers `V`, forms `V^H V + kappa I` and
    /// `V^H p`, and solves. Cost grows as `|S_c|^2 (Nr - U) + |S_c|^3`.
    pub fn solve_general(
        &mut self,
        p: &[Complex64],
        null_basis: &DMatrix<Complex64>,
        saturated: &[usize],
        kappa: f64,
    ) -> &[Complex64] {
        let m = saturated.len();
        let d = null_basis.nrows();
        self.v.clear();
        for &k in saturated {
            self.v.extend_from_slice(null_basis.column(k).as_slice());
        }
        self.gram.clear();
        self.gram.resize(m * m, ZERO);
        self.rhs.clear();
        for a in 0..m {
            let va = &self.v[a * d..(a + 1) * d];
            for b in a..m {
                let vb = &self.v[b * d..(b + 1) * d];
                let g: Complex64 = va.iter().zip(vb).map(|(x, y)| x.conj() * y).sum();
                self.gram[a * m + b] = g;
                self.gram[b * m + a] = g.conj();
            }
            self.gram[a * m + a] += kappa;
            self.rhs.push(va.iter().zip(p).map(|(x, y)| x.conj() * y).sum());
        }
        solve_in_place(&mut self.gram, &mut self.rhs, m);
        &self.rhs
    }
}

/// Solves the recovery system in `gram`/`rhs`, falling back to the
/// pseudo-inverse when the Cholesky factorization breaks down.
fn solve_in_place(gram: &mut [Complex64], rhs: &mut [Complex64], m: usize) {
    let a_copy = gram.to_vec();
    let b_copy = rhs.to_vec();
    if !solve_hermitian(gram, rhs, m) {
        let a = DMatrix::from_row_slice(m, m, &a_copy);
        let x = solve_pinv(&a, &b_copy);
        rhs.copy_from_slice(&x);
    }
}

/// Rank-one shortcut for a single flagged antenna `k`:
/// `n_hat_k = V^H p / (kappa + |V|^2)` with `V = N[:, k]`.
#[inline]
pub fn solve_rank_one(p: &[Complex64], null_basis: &DMatrix<Complex64>, k: usize, kappa: f64) -> Complex64 {
    let v = null_basis.column(k);
    let (mut num, mut energy) = (ZERO, 0.0);
    for (x, y) in v.iter().zip(p) {
        num += x.conj() * y;
        energy += x.norm_sqr();
    }
    let den = kappa + energy;
    if den > 0.0 {
        num / den
    } else {
        ZERO
    }
}

/// Estimates the saturation noise on `saturated` from the null-space
/// projection `p = N y`. Uses the rank-one shortcut when one antenna is
/// flagged.
pub fn solve_clipping_noise(
    p: &[Complex64],
    null_basis: &DMatrix<Complex64>,
    saturated: &[usize],
    kappa: f64,
) -> Vec<Complex64> {
    match saturated {
        [] => Vec::new(),
        [k] => vec![solve_rank_one(p, null_basis, *k, kappa)],
        _ => NullSpaceSolver::new()
            .solve_general(p, null_basis, saturated, kappa)
            .to_vec(),
    }
}

/// Literal recovery route: `p = N y`, then the regularized least-squares
/// estimate on `S_c`.
pub fn saturation_recovery(
    y_adc: &[Complex64],
    null_basis: &DMatrix<Complex64>,
    saturated: &[usize],
    cfg: &SatRecoveryConfig,
) -> Result<Recovery> {
    cfg.validate()?;
    let nr = null_basis.ncols();
    if y_adc.len() != nr {
        return Err(Error::DimensionMismatch {
            expected: nr,
            actual: y_adc.len(),
        });
    }
    check_indices(saturated, nr)?;
    if y_adc.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("received samples"));
    }

    let mut noise = vec![ZERO; nr];
    if !saturated.is_empty() {
        let p = null_basis * nalgebra::DVector::from_column_slice(y_adc);
        let est = solve_clipping_noise(p.as_slice(), null_basis, saturated, cfg.kappa);
        for (&k, v) in saturated.iter().zip(est) {
            noise[k] = v;
        }
    }
    let corrected = y_adc.iter().zip(&noise).map(|(y, n)| y - n).collect();
    Ok(Recovery {
        noise_estimate: noise,
        corrected,
        underdetermined: saturated.len() > null_basis.nrows(),
    })
}

fn check_indices(saturated: &[usize], nr: usize) -> Result<()> {
    let mut seen = vec![false; nr];
    for &k in saturated {
        if k >= nr {
            return Err(config_err(format!("antenna index {k} out of range for {nr} antennas")));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(config_err(format!("antenna index {k} repeated in saturated set")));
        }
    }
    Ok(())
}

/// Per-sample recovery through the precomputed null-space projector.
///
/// Holds its own scratch space; one instance per worker thread.
#[derive(Debug, Clone)]
pub struct ProjectorRecovery<'a> {
    projector: &'a DMatrix<Complex64>,
    null_dim: usize,
    kappa: f64,
    gram: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl<'a> ProjectorRecovery<'a> {
    pub fn new(projector: &'a DMatrix<Complex64>, null_dim: usize, kappa: f64) -> Self {
        ProjectorRecovery {
            projector,
            null_dim,
            kappa,
            gram: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Subtracts the estimated saturation noise from `y` in place. Returns
    /// `true` when the flagged set exceeds the null-space dimension.
    pub fn recover_in_place(&mut self, y: &mut [Complex64], saturated: &[usize]) -> bool {
        let m = saturated.len();
        if m == 0 {
            return false;
        }
        let p = self.projector;
        self.rhs.clear();
        for &k in saturated {
            // (P y)_k = sum_j conj(P[j, k]) y_j, since P is Hermitian.
            let col = p.column(k);
            self.rhs.push(col.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum());
        }
        if m == 1 {
            let k = saturated[0];
            let den = self.kappa + p[(k, k)].re;
            if den > 0.0 {
                y[k] -= self.rhs[0] / den;
            }
            return self.null_dim < 1;
        }
        self.gram.clear();
        self.gram.reserve(m * m);
        for &a in saturated {
            for &b in saturated {
                self.gram.push(p[(a, b)]);
            }
        }
        for a in 0..m {
            self.gram[a * m + a] += self.kappa;
        }
        solve_in_place(&mut self.gram, &mut self.rhs, m);
        for (&k, v) in saturated.iter().zip(&self.rhs) {
            y[k] -= v;
        }
        m > self.null_dim
    }
}
