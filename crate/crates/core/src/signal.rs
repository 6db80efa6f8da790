//! Multi-user QAM baseband frames and dBm/volt conversions.
//!
//! Power convention: a power `P` (dBm) across an impedance `R` corresponds to
//! a sinusoid of peak amplitude `A = sqrt(2 P R)`. A complex baseband
//! sequence carries that power when its RMS magnitude is `A / sqrt(2)`, i.e.
//! when `mean |x|^2 = P R`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::seed;

pub const DEFAULT_IMPEDANCE_OHM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PulseShape {
    /// Each symbol is repeated `oversampling_factor` times.
    RectHold,
    RootRaisedCosine {
        rolloff: f64,
        span_symbols: usize,
    },
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape::RootRaisedCosine {
            rolloff: 0.3,
            span_symbols: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformConfig {
    pub modulation_order: usize,
    pub oversampling_factor: usize,
    pub symbol_count: usize,
    pub pulse_shape: PulseShape,
    pub seed: u64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        WaveformConfig {
            modulation_order: 16,
            oversampling_factor: 5,
            symbol_count: 10_000,
            pulse_shape: PulseShape::default(),
            seed: 0,
        }
    }
}

impl WaveformConfig {
    pub fn validate(&self) -> Result<()> {
        let side = qam_side(self.modulation_order).ok_or_else(|| {
            config_err(format!(
                "modulation order {} is not a perfect square >= 4",
                self.modulation_order
            ))
        })?;
        debug_assert!(side >= 2);
        if self.oversampling_factor == 0 {
            return Err(config_err("oversampling factor must be >= 1"));
        }
        if self.symbol_count == 0 {
            return Err(config_err("symbol count must be >= 1"));
        }
        if let PulseShape::RootRaisedCosine { rolloff, span_symbols } = self.pulse_shape {
            if !(0.0..=1.0).contains(&rolloff) || rolloff.is_nan() {
                return Err(config_err(format!("RRC rolloff {rolloff} outside [0, 1]")));
            }
            if span_symbols == 0 {
                return Err(config_err("RRC span must be >= 1 symbol"));
            }
        }
        Ok(())
    }

    /// Number of samples per user row.
    pub fn sample_count(&self) -> usize {
        self.symbol_count * self.oversampling_factor
    }
}

fn qam_side(m: usize) -> Option<usize> {
    if m < 4 {
        return None;
    }
    let side = (m as f64).sqrt().round() as usize;
    (side * side == m).then_some(side)
}

/// Unit-average-energy square QAM alphabet, row-major over (real, imag).
pub fn qam_constellation(m: usize) -> Result<Vec<Complex64>> {
    let side = qam_side(m).ok_or_else(|| config_err(format!("modulation order {m} is not a perfect square >= 4")))?;
    let norm = (2.0 * (m as f64 - 1.0) / 3.0).sqrt();
    let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) / norm;
    Ok((0..side)
        .flat_map(|i| (0..side).map(move |q| Complex64::new(level(i), level(q))))
        .collect())
}

/// Root-raised-cosine taps sampled at `sps` samples per symbol over
/// `span` symbols, scaled so that the sum of squared taps equals `sps`
/// (unit output power for unit-energy symbols).
pub fn rrc_taps(rolloff: f64, span: usize, sps: usize) -> Vec<f64> {
    let n = span * sps + 1;
    let mid = (n / 2) as f64;
    let b = rolloff;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - mid) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 + b * (4.0 / std::f64::consts::PI - 1.0)
            } else if b > 0.0 && (t.abs() - 1.0 / (4.0 * b)).abs() < 1e-9 {
                let pi = std::f64::consts::PI;
                b / 2f64.sqrt()
                    * ((1.0 + 2.0 / pi) * (pi / (4.0 * b)).sin() + (1.0 - 2.0 / pi) * (pi / (4.0 * b)).cos())
            } else {
                let pi = std::f64::consts::PI;
                let num = (pi * t * (1.0 - b)).sin() + 4.0 * b * t * (pi * t * (1.0 + b)).cos();
                let den = pi * t * (1.0 - (4.0 * b * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = (sps as f64 / energy).sqrt();
    taps.iter_mut().for_each(|h| *h *= scale);
    taps
}

fn shape_row(symbols: &[Complex64], cfg: &WaveformConfig) -> Vec<Complex64> {
    let sps = cfg.oversampling_factor;
    let len = symbols.len() * sps;
    match cfg.pulse_shape {
        PulseShape::RectHold => symbols.iter().flat_map(|&a| std::iter::repeat_n(a, sps)).collect(),
        PulseShape::RootRaisedCosine { rolloff, span_symbols } => {
            // Circular convolution keeps the frame stationary end to end.
            let taps = rrc_taps(rolloff, span_symbols, sps);
            let delay = taps.len() / 2;
            let mut out = vec![Complex64::new(0.0, 0.0); len];
            for (j, &a) in symbols.iter().enumerate() {
                let base = j * sps + len - delay % len;
                for (k, &h) in taps.iter().enumerate() {
                    out[(base + k) % len] += a * h;
                }
            }
            out
        }
    }
}

/// Generates `num_users` independent unit-power QAM rows (users x samples).
///
/// Each user draws its symbols from its own sub-seed of `cfg.seed`, so rows do
/// not depend on one another or on generation order.
pub fn gen_qam_frame(cfg: &WaveformConfig, num_users: usize) -> Result<DMatrix<Complex64>> {
    cfg.validate()?;
    if num_users == 0 {
        return Err(config_err("at least one user is required"));
    }
    let alphabet = qam_constellation(cfg.modulation_order)?;
    let t = cfg.sample_count();
    let mut out = DMatrix::<Complex64>::zeros(num_users, t);
    for u in 0..num_users {
        let mut rng = seed::rng(seed::derive(cfg.seed, &[u as u64]));
        let symbols: Vec<Complex64> = (0..cfg.symbol_count)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        let row = shape_row(&symbols, cfg);
        for (k, v) in row.into_iter().enumerate() {
            out[(u, k)] = v;
        }
    }
    Ok(out)
}

/// Peak amplitude (volts) of a sinusoid dissipating `power_dbm` in `impedance_ohm`.
pub fn dbm_to_amplitude(power_dbm: f64, impedance_ohm: f64) -> f64 {
    (2.0 * 10f64.powf((power_dbm - 30.0) / 10.0) * impedance_ohm).sqrt()
}

/// Inverse of [`dbm_to_amplitude`].
pub fn amplitude_to_dbm(amplitude: f64, impedance_ohm: f64) -> f64 {
    10.0 * (amplitude * amplitude / (2.0 * impedance_ohm)).log10() + 30.0
}

/// Mean square magnitude (V^2) of a complex baseband signal at `power_dbm`.
pub fn dbm_to_mean_square(power_dbm: f64, impedance_ohm: f64) -> f64 {
    let a = dbm_to_amplitude(power_dbm, impedance_ohm);
    0.5 * a * a
}

pub fn mean_square_to_dbm(mean_square: f64, impedance_ohm: f64) -> f64 {
    10.0 * (mean_square / impedance_ohm).log10() + 30.0
}

pub fn mean_power<'a>(samples: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    let (sum, n) = samples
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v.norm_sqr(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Peak-to-average power ratio in dB.
pub fn papr_db(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    10.0 * (peak / mean_power(samples)).log10()
}

/// Scales `samples` by a positive real factor so that their power equals
/// `target_dbm` under the amplitude convention of this module.
pub fn scale_to_power(samples: &[Complex64], target_dbm: f64, impedance_ohm: f64) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let gain = power_gain(samples.iter(), target_dbm, impedance_ohm)?;
    Ok(samples.iter().map(|v| v * gain).collect())
}

fn power_gain<'a>(
    samples: impl IntoIterator<Item = &'a Complex64>,
    target_dbm: f64,
    impedance_ohm: f64,
) -> Result<f64> {
    let ms = mean_power(samples);
    if !(ms > 0.0) {
        return Err(Error::ZeroPower);
    }
    let target_rms = dbm_to_amplitude(target_dbm, impedance_ohm) / 2f64.sqrt();
    Ok(target_rms / ms.sqrt())
}

/// Per-user transmit samples referred to the receive-antenna plane.
#[derive(Debug, Clone)]
pub struct TransmitFrame {
    /// Users x samples, volts.
    pub samples: DMatrix<Complex64>,
    pub per_user_power_dbm: Vec<f64>,
}

impl TransmitFrame {
    /// Generates a frame and scales each user row to its target power.
    pub fn generate(cfg: &WaveformConfig, per_user_power_dbm: &[f64], impedance_ohm: f64) -> Result<Self> {
        let mut samples = gen_qam_frame(cfg, per_user_power_dbm.len())?;
        for (u, &p) in per_user_power_dbm.iter().enumerate() {
            let gain = power_gain(samples.row(u).iter(), p, impedance_ohm)?;
            samples.row_mut(u).iter_mut().for_each(|v| *v *= gain);
        }
        Ok(TransmitFrame {
            samples,
            per_user_power_dbm: per_user_power_dbm.to_vec(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Mean square value (V^2) of each user row.
    pub fn row_powers(&self) -> Vec<f64> {
        (0..self.num_users())
            .map(|u| mean_power(self.samples.row(u).iter()))
            .collect()
    }
}
