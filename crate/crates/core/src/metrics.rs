//! Bussgang-normalized distortion and link budget arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual distortion of an estimate after optimal complex scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Scale `alpha` minimizing `mean |s - alpha s_hat|^2`.
    pub alpha: Complex64,
    /// Residual power at the optimal scale, V^2.
    pub d: f64,
    /// `d / mean |s|^2`, in `[0, 1]`.
    pub d_bar: f64,
    pub d_bar_db: f64,
    /// `mean |s - s_hat|^2` (unit scale).
    pub mse: f64,
}

/// `D = min_a mean|s - a s_hat|^2`, normalized by `mean|s|^2`.
///
/// Expectations are sample means over the given sequences. An all-zero
/// estimate carries no signal: `alpha = 0` and `d_bar = 1`.
pub fn bussgang_distortion(s: &[Complex64], s_hat: &[Complex64]) -> Result<DistortionReport> {
    if s.len() != s_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            actual: s_hat.len(),
        });
    }
    if s.len() < 2 {
        return Err(Error::Empty("need at least two samples"));
    }
    let n = s.len() as f64;
    let (mut cross, mut ee, mut ss, mut mse) = (Complex64::new(0.0, 0.0), 0.0, 0.0, 0.0);
    for (a, b) in s.iter().zip(s_hat) {
        cross += b.conj() * a;
        ee += b.norm_sqr();
        ss += a.norm_sqr();
        mse += (a - b).norm_sqr();
    }
    if !(ss > 0.0) {
        return Err(Error::ZeroPower);
    }
    if !(cross.re.is_finite() && cross.im.is_finite() && ee.is_finite()) {
        return Err(Error::NonFinite("estimate"));
    }
    let (alpha, d_bar) = if ee > 0.0 {
        let alpha = cross / ee;
        // 1 - |<s_hat, s>|^2 / (<s_hat, s_hat> <s, s>), but summed from the
        // residual so small values keep their relative precision.
        let resid: f64 = s.iter().zip(s_hat).map(|(a, b)| (a - alpha * b).norm_sqr()).sum();
        (alpha, (resid / ss).clamp(0.0, 1.0))
    } else {
        (Complex64::new(0.0, 0.0), 1.0)
    };
    let ms = ss / n;
    Ok(DistortionReport {
        alpha,
        d: d_bar * ms,
        d_bar,
        d_bar_db: 10.0 * d_bar.log10(),
        mse: mse / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub rx_dbm: f64,
    pub rx_peak_dbm: f64,
}

/// Received average and peak power per element for a free-space link.
pub fn link_budget(tx_dbm: f64, tx_gain_db: f64, pathloss_db: f64, rx_elem_gain_db: f64, papr_db: f64) -> LinkBudget {
    let rx_dbm = tx_dbm + tx_gain_db - pathloss_db + rx_elem_gain_db;
    LinkBudget {
        rx_dbm,
        rx_peak_dbm: rx_dbm + papr_db,
    }
}
