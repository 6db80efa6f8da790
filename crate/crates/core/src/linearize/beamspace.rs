//! Beam-space cancellation of the cubic LNA term after MIMO combining.
//!
//! After zero-forcing, the dominant third-order product that lands on stream
//! `i` is proportional to `s_i * sum_u |s_u|^2`. Each compensated stream gets
//! a single complex LMS tap `w_i` on the regressor
//!
//! ```text
//! P   = sum_{u in U} |s_hat_u|^2
//! r_i = s_hat_i * P                 (RegressorMode::Raw)
//! r_i = s_hat_i * (P - mean(P))     (RegressorMode::Centered)
//! e_i = s_hat_i - w_i r_i           (compensated output)
//! w_i <- w_i + mu_i e_i conj(r_i)
//! ```
//!
//! With the raw regressor the wanted signal is itself correlated with `r_i`,
//! so minimizing `E|e_i|^2` also cancels signal whenever `P` fluctuates. The
//! centered regressor removes that correlation; the tap then converges to
//! the cubic coefficient and leaves a scaled copy of the stream.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorMode {
    Raw,
    /// Subtract the running mean of the total active-stream power.
    #[default]
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmsConfig {
    /// Step size as a fraction of `1 / mean|r_i|^2`.
    pub mu_scale: f64,
    /// Number of leading samples used to normalize the step size.
    pub calibration_len: usize,
    /// Divergence guard: `|w_i| * mean(P)` may not exceed this value.
    pub weight_bound: f64,
    pub regressor: RegressorMode,
    /// Number of passes over the frame; output is taken from the last one.
    pub epochs: usize,
}

impl Default for LmsConfig {
    fn default() -> Self {
        LmsConfig {
            mu_scale: 5e-4,
            calibration_len: 1000,
            weight_bound: 10.0,
            regressor: RegressorMode::Centered,
            epochs: 2,
        }
    }
}

impl LmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_scale > 0.0) || !self.mu_scale.is_finite() {
            return Err(config_err(format!("LMS step scale {} must be positive", self.mu_scale)));
        }
        if self.calibration_len == 0 || self.epochs == 0 {
            return Err(config_err("LMS calibration length and epoch count must be >= 1"));
        }
        if !(self.weight_bound > 0.0) {
            return Err(config_err("LMS weight bound must be positive"));
        }
        Ok(())
    }
}

/// `{u : powers[u] >= eta}`.
pub fn select_streams(powers_linear: &[f64], eta: f64) -> Vec<usize> {
    powers_linear
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= eta)
        .map(|(u, _)| u)
        .collect()
}

/// Adaptive state for the beam-space compensator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmsState {
    /// One tap per entry of `streams`.
    pub weights: Vec<Complex64>,
    /// Stream indices being compensated.
    pub streams: Vec<usize>,
    /// Step size per compensated stream.
    pub mu: Vec<f64>,
    /// Streams contributing to the power regressor.
    pub active_set: Vec<usize>,
    /// Power threshold that produced `active_set`, linear units.
    pub eta: f64,
    pub regressor: RegressorMode,
    /// Running mean of `P` and the number of samples behind it.
    pub power_mean: f64,
    pub power_count: u64,
    /// Absolute bound on `|w_i|`; infinite disables the guard.
    pub weight_bound: f64,
    /// Number of times the divergence guard halved a step size.
    pub halvings: usize,
}

impl LmsState {
    pub fn new(streams: Vec<usize>, active_set: Vec<usize>, mu: f64, eta: f64, regressor: RegressorMode) -> Self {
        let n = streams.len();
        LmsState {
            weights: vec![Complex64::new(0.0, 0.0); n],
            streams,
            mu: vec![mu; n],
            active_set,
            eta,
            regressor,
            power_mean: 0.0,
            power_count: 0,
            weight_bound: f64::INFINITY,
            halvings: 0,
        }
    }

    /// Sets the power mean, per-stream step sizes and the weight bound from a
    /// block of leading samples (`block[t]` is the combined vector at time t).
    pub fn calibrate<'a, I>(&mut self, block: I, cfg: &LmsConfig) -> Result<()>
    where
        I: IntoIterator<Item = &'a [Complex64]> + Clone,
    {
        cfg.validate()?;
        let mut count = 0usize;
        let mut p_sum = 0.0;
        for s in block.clone() {
            p_sum += self.total_power(s);
            count += 1;
        }
        if count == 0 {
            return Err(Error::Empty("LMS calibration block"));
        }
        let p_mean = p_sum / count as f64;
        self.power_mean = p_mean;
        self.power_count = count as u64;
        let mut r_pow = vec![0.0; self.streams.len()];
        for s in block {
            let g = self.regressor_gain(self.total_power(s));
            for (acc, &i) in r_pow.iter_mut().zip(&self.streams) {
                *acc += (s[i] * g).norm_sqr();
            }
        }
        for (mu, acc) in self.mu.iter_mut().zip(r_pow) {
            let m = acc / count as f64;
            *mu = if m > 0.0 { cfg.mu_scale / m } else { 0.0 };
        }
        self.weight_bound = if p_mean > 0.0 {
            cfg.weight_bound / p_mean
        } else {
            f64::INFINITY
        };
        Ok(())
    }

    #[inline]
    fn total_power(&self, s_hat: &[Complex64]) -> f64 {
        self.active_set.iter().map(|&u| s_hat[u].norm_sqr()).sum()
    }

    #[inline]
    fn regressor_gain(&self, p: f64) -> f64 {
        match self.regressor {
            RegressorMode::Raw => p,
            RegressorMode::Centered => p - self.power_mean,
        }
    }

    /// One LMS iteration writing the compensated vector into `out`.
    /// Streams that are not compensated pass through unchanged.
    pub fn step_into(&mut self, s_hat: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if self.active_set.is_empty() {
            return Err(config_err(
                "beam-space compensation needs a non-empty active stream set",
            ));
        }
        if s_hat.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("combined stream sample"));
        }
        if let Some(&bad) = self.active_set.iter().chain(&self.streams).find(|&&u| u >= s_hat.len()) {
            return Err(config_err(format!(
                "stream index {bad} out of range for {} streams",
                s_hat.len()
            )));
        }
        out.copy_from_slice(s_hat);
        let p = self.total_power(s_hat);
        let g = self.regressor_gain(p);
        for j in 0..self.streams.len() {
            let i = self.streams[j];
            let r = s_hat[i] * g;
            let e = s_hat[i] - self.weights[j] * r;
            out[i] = e;
            let next = self.weights[j] + e * r.conj() * self.mu[j];
            if next.norm() > self.weight_bound {
                self.mu[j] *= 0.5;
                self.halvings += 1;
            } else {
                self.weights[j] = next;
            }
        }
        if self.regressor == RegressorMode::Centered {
            self.power_count += 1;
            self.power_mean += (p - self.power_mean) / self.power_count as f64;
        }
        Ok(())
    }
}

/// One LMS iteration; returns the compensated vector.
pub fn beamspace_compensate_step(s_hat: &[Complex64], state: &mut LmsState) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); s_hat.len()];
    state.step_into(s_hat, &mut out)?;
    Ok(out)
}
