//! Receiver front-end impairments: a memoryless LNA with third-order
//! compression and hard saturation, an array-wide AGC and a mid-rise uniform
//! ADC applied independently to I and Q.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::metrics::bussgang_distortion;
use crate::signal::{amplitude_to_dbm, dbm_to_amplitude};

/// Coefficients of `p(x) = beta1 x + beta3 x |x|^2` for `|x| <= v_sat`,
/// `v_max x / |x|` above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnaParams {
    pub beta1: f64,
    /// V^-2, negative for a compressive amplifier.
    pub beta3: f64,
    pub v_sat: f64,
    pub v_max: f64,
}

impl LnaParams {
    /// Builds the parameter set, deriving `v_max` from continuity at the knee.
    pub fn new(beta1: f64, beta3: f64, v_sat: f64) -> Result<Self> {
        if !(beta1 > 0.0) || !beta1.is_finite() {
            return Err(config_err(format!("beta1 must be positive, got {beta1}")));
        }
        if !beta3.is_finite() || !(v_sat > 0.0) || !v_sat.is_finite() {
            return Err(config_err("beta3 must be finite and v_sat positive"));
        }
        if beta3 < 0.0 {
            let peak = (beta1 / (3.0 * beta3.abs())).sqrt();
            if v_sat > peak * (1.0 + 1e-12) {
                return Err(config_err(format!(
                    "v_sat {v_sat:.4e} V beyond the monotone range {peak:.4e} V of the cubic"
                )));
            }
        }
        Ok(LnaParams {
            beta1,
            beta3,
            v_sat,
            v_max: beta1 * v_sat + beta3 * v_sat.powi(3),
        })
    }

    /// Same knee, third-order term removed.
    pub fn clip_only(&self) -> Self {
        LnaParams {
            beta1: self.beta1,
            beta3: 0.0,
            v_sat: self.v_sat,
            v_max: self.beta1 * self.v_sat,
        }
    }

    /// Two-tone input intercept amplitude, `sqrt(4 beta1 / (3 |beta3|))`.
    pub fn ip3_amplitude(&self) -> f64 {
        (4.0 * self.beta1 / (3.0 * self.beta3.abs())).sqrt()
    }

    pub fn iip3_dbm(&self, impedance_ohm: f64) -> f64 {
        amplitude_to_dbm(self.ip3_amplitude(), impedance_ohm)
    }

    /// Input magnitude at which the cubic stops increasing (infinite when
    /// `beta3 >= 0`).
    pub fn monotone_limit(&self) -> f64 {
        if self.beta3 < 0.0 {
            (self.beta1 / (3.0 * self.beta3.abs())).sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// Parameters whose knee sits at the peak of the cubic. Used to invert a
    /// polynomial-only amplifier over its whole invertible range.
    pub fn knee_at_monotone_limit(&self) -> Result<Self> {
        let limit = self.monotone_limit();
        if !limit.is_finite() {
            return Err(config_err("cubic has no turning point"));
        }
        LnaParams::new(self.beta1, self.beta3, limit)
    }
}

/// Derives LNA coefficients from gain and IIP3.
///
/// `beta1 = 10^(G/20)`, `beta3 = -4 beta1 / (3 A^2)` with `A` the IIP3 peak
/// amplitude, and the saturation knee at `A / 4`.
pub fn lna_params_from_spec(gain_db: f64, iip3_dbm: f64, impedance_ohm: f64) -> Result<LnaParams> {
    if !gain_db.is_finite() || !iip3_dbm.is_finite() {
        return Err(config_err("gain and IIP3 must be finite"));
    }
    let beta1 = 10f64.powf(gain_db / 20.0);
    let a_ip3 = dbm_to_amplitude(iip3_dbm, impedance_ohm);
    let beta3 = -4.0 * beta1 / (3.0 * a_ip3 * a_ip3);
    LnaParams::new(beta1, beta3, a_ip3 / 4.0)
}

/// Memoryless LNA response. The output phase always equals the input phase.
#[inline]
pub fn lna(x: Complex64, p: &LnaParams) -> Complex64 {
    let r2 = x.norm_sqr();
    if r2 <= p.v_sat * p.v_sat {
        x * (p.beta1 + p.beta3 * r2)
    } else {
        x * (p.v_max / r2.sqrt())
    }
}

/// Which parts of the LNA response are active.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LnaMode {
    /// Cubic below the knee, hard saturation above.
    #[default]
    Full,
    /// Linear gain with hard saturation.
    ClipOnly,
    /// Cubic everywhere.
    PolyOnly,
    /// Linear gain only.
    Linear,
}

/// An LNA parameter set together with the active nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnaModel {
    pub params: LnaParams,
    pub mode: LnaMode,
}

impl LnaModel {
    pub fn new(params: LnaParams, mode: LnaMode) -> Self {
        let params = match mode {
            LnaMode::ClipOnly => params.clip_only(),
            _ => params,
        };
        LnaModel { params, mode }
    }

    #[inline]
    pub fn apply(&self, x: Complex64) -> Complex64 {
        let p = &self.params;
        match self.mode {
            LnaMode::Full | LnaMode::ClipOnly => lna(x, p),
            LnaMode::PolyOnly => x * (p.beta1 + p.beta3 * x.norm_sqr()),
            LnaMode::Linear => x * p.beta1,
        }
    }

    /// Largest output magnitude, if the response saturates.
    pub fn saturation_level(&self) -> Option<f64> {
        matches!(self.mode, LnaMode::Full | LnaMode::ClipOnly).then_some(self.params.v_max)
    }

    /// True when `|x|` lies above the saturation knee of this model.
    #[inline]
    pub fn saturates(&self, x: Complex64) -> bool {
        self.saturation_level().is_some() && x.norm_sqr() > self.params.v_sat * self.params.v_sat
    }
}

/// Uniform mid-rise quantizer applied to I and Q separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub bits: u32,
    /// Half range per real dimension, volts.
    pub clip_level: f64,
    /// `clip_level / rms_per_dimension` targeted by the AGC.
    pub loading_fraction: f64,
}

impl AdcConfig {
    pub fn new(bits: u32, clip_level: f64, loading_fraction: f64) -> Result<Self> {
        let cfg = AdcConfig {
            bits,
            clip_level,
            loading_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=12).contains(&self.bits) {
            return Err(config_err(format!("ADC bits {} outside [1, 12]", self.bits)));
        }
        if !(self.loading_fraction > 0.0 && self.loading_fraction <= 4.0) {
            return Err(config_err(format!(
                "loading fraction {} outside (0, 4]",
                self.loading_fraction
            )));
        }
        if !(self.clip_level > 0.0) || !self.clip_level.is_finite() {
            return Err(config_err("ADC clip level must be positive"));
        }
        Ok(())
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        2.0 * self.clip_level / self.levels() as f64
    }

    /// Largest reconstruction level per dimension, `c - step/2`.
    pub fn max_code(&self) -> f64 {
        self.clip_level - 0.5 * self.step()
    }

    /// Returns a copy with the clip level set from the AGC measurement.
    pub fn with_agc(&self, rms_per_dim: f64) -> Result<Self> {
        let mut out = *self;
        out.clip_level = agc_clip_level(rms_per_dim, self)?;
        Ok(out)
    }
}

/// Common AGC clip level for the whole array: `loading_fraction * rms`.
pub fn agc_clip_level(rms_per_dim: f64, cfg: &AdcConfig) -> Result<f64> {
    if !(rms_per_dim > 0.0) || !rms_per_dim.is_finite() {
        return Err(Error::ZeroPower);
    }
    Ok(cfg.loading_fraction * rms_per_dim)
}

/// RMS value per real dimension of a complex sample set.
pub fn rms_per_dim<'a>(samples: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    (0.5 * crate::signal::mean_power(samples)).sqrt()
}

#[inline]
fn quantize_real(v: f64, step: f64, half_levels: f64) -> f64 {
    let idx = (v / step).floor().clamp(-half_levels, half_levels - 1.0);
    step * (idx + 0.5)
}

#[inline]
pub fn quantize(y: Complex64, cfg: &AdcConfig) -> Complex64 {
    let step = cfg.step();
    let half = (cfg.levels() / 2) as f64;
    Complex64::new(quantize_real(y.re, step, half), quantize_real(y.im, step, half))
}

/// True when either component sits on the outermost reconstruction level.
#[inline]
pub fn is_overload_code(q: Complex64, cfg: &AdcConfig) -> bool {
    let edge = cfg.max_code() * (1.0 - 1e-12);
    q.re.abs() >= edge || q.im.abs() >= edge
}

/// Picks the loading fraction from `grid` that minimizes the normalized
/// Bussgang distortion of quantizing `calibration` with `bits` bits.
///
/// Ties resolve to the smaller fraction. Returns `(fraction, d_bar)`.
pub fn optimize_loading_fraction(calibration: &[Complex64], bits: u32, grid: &[f64]) -> Result<(f64, f64)> {
    if calibration.is_empty() {
        return Err(Error::Empty("calibration signal"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("loading fraction grid"));
    }
    let rms = rms_per_dim(calibration);
    if !(rms > 0.0) {
        return Err(Error::ZeroPower);
    }
    let mut best: Option<(f64, f64)> = None;
    let mut out = vec![Complex64::new(0.0, 0.0); calibration.len()];
    for &fraction in grid {
        let cfg = AdcConfig::new(bits, fraction * rms, fraction)?;
        for (o, &v) in out.iter_mut().zip(calibration) {
            *o = quantize(v, &cfg);
        }
        let d = bussgang_distortion(calibration, &out)?.d_bar;
        let better = match best {
            None => true,
            Some((bf, bd)) => d < bd || (d == bd && fraction < bf),
        };
        if better {
            best = Some((fraction, d));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn params_reproduce_reference_lna() {
        let p = lna_params_from_spec(35.0, -10.0, 50.0).unwrap();
        assert_relative_eq!(p.beta1, 56.234_132_519_034_91, max_relative = 1e-12);
        assert!((p.beta1 - 56.23).abs() < 5e-3);
        assert!((p.beta3 - -7497.0).abs() < 1.0, "beta3 {}", p.beta3);
        assert_relative_eq!(p.v_sat, 0.025, max_relative = 1e-12);

        let p = lna_params_from_spec(15.0, -10.0, 50.0).unwrap();
        assert!((p.beta1 - 5.623).abs() < 1e-3);

        let p = lna_params_from_spec(15.0, -40.0, 50.0).unwrap();
        let expect = 4.0 * 5.623_413_251_903_491 / (3.0 * 3.162_277_660_168_379e-3f64.powi(2));
        assert_relative_eq!(p.beta3.abs(), expect, max_relative = 1e-9);
        assert!((p.beta3.abs() - 7.50e5).abs() < 0.01e5);
    }

    #[test]
    fn iip3_round_trip() {
        for iip3 in [-40.0, -33.5, -16.0, -10.0, 5.0] {
            let p = lna_params_from_spec(15.0, iip3, 50.0).unwrap();
            assert!((p.iip3_dbm(50.0) - iip3).abs() < 1e-9);
        }
    }

    #[test]
    fn lna_examples() {
        let p = lna_params_from_spec(35.0, -10.0, 50.0).unwrap();
        assert_eq!(lna(Complex64::new(0.0, 0.0), &p), Complex64::new(0.0, 0.0));

        let x = Complex64::from_polar(2.0 * p.v_sat, 0.7);
        let y = lna(x, &p);
        assert_relative_eq!(y.norm(), p.v_max, max_relative = 1e-12);
        let expect = 56.234_132_519_034_91 * 0.025 - p.beta3.abs() * 0.025f64.powi(3);
        assert_relative_eq!(p.v_max, expect, max_relative = 1e-12);
        assert!((p.v_max - 1.2886).abs() < 1e-3, "v_max {}", p.v_max);

        // Continuity at the knee.
        let knee = lna(Complex64::new(p.v_sat, 0.0), &p);
        assert_relative_eq!(knee.re, p.v_max, max_relative = 1e-15);
        let above = lna(Complex64::new(p.v_sat * (1.0 + 1e-12), 0.0), &p);
        assert_relative_eq!(above.re, p.v_max, max_relative = 1e-10);
    }

    #[test]
    fn lna_am_am_monotone_and_phase_preserving() {
        let p = lna_params_from_spec(15.0, -30.0, 50.0).unwrap();
        let mut prev = 0.0;
        for k in 0..=4000 {
            let r = k as f64 * p.v_sat * 3.0 / 4000.0;
            let phase = 0.37 * k as f64;
            let y = lna(Complex64::from_polar(r, phase), &p);
            assert!(y.norm() >= prev - 1e-15);
            prev = y.norm();
            if r > 0.0 {
                let d = (y.arg() - Complex64::from_polar(1.0, phase).arg()).abs();
                assert!(d < 1e-12 || (d - 2.0 * std::f64::consts::PI).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_monotone_knee() {
        assert!(LnaParams::new(1.0, -1.0, 1.0).is_err());
        assert!(LnaParams::new(1.0, -1.0, (1.0f64 / 3.0).sqrt()).is_ok());
        assert!(LnaParams::new(0.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn model_modes() {
        let p = lna_params_from_spec(15.0, -30.0, 50.0).unwrap();
        let x = Complex64::new(3.0 * p.v_sat, 0.0);
        let clip = LnaModel::new(p, LnaMode::ClipOnly);
        assert_relative_eq!(clip.apply(x).re, p.beta1 * p.v_sat, max_relative = 1e-14);
        let small = Complex64::new(0.5 * p.v_sat, 0.0);
        assert_relative_eq!(clip.apply(small).re, p.beta1 * small.re, max_relative = 1e-14);
        let poly = LnaModel::new(p, LnaMode::PolyOnly);
        assert_relative_eq!(
            poly.apply(x).re,
            p.beta1 * x.re + p.beta3 * x.re.powi(3),
            max_relative = 1e-14
        );
        assert_eq!(poly.saturation_level(), None);
        let lin = LnaModel::new(p, LnaMode::Linear);
        assert_relative_eq!(lin.apply(x).re, p.beta1 * x.re);
        assert!(clip.saturates(x));
        assert!(!clip.saturates(small));
    }

    #[test]
    fn agc_examples() {
        let cfg = AdcConfig::new(6, 1.0, 3.0).unwrap();
        assert_relative_eq!(agc_clip_level(0.1, &cfg).unwrap(), 0.3, max_relative = 1e-15);
        let one = AdcConfig::new(6, 1.0, 1.0).unwrap();
        assert_relative_eq!(agc_clip_level(0.25, &one).unwrap(), 0.25);
        assert!(matches!(agc_clip_level(0.0, &cfg), Err(Error::ZeroPower)));
        assert!(AdcConfig::new(0, 1.0, 1.0).is_err());
        assert!(AdcConfig::new(13, 1.0, 1.0).is_err());
        assert!(AdcConfig::new(3, 1.0, 4.5).is_err());
    }

    #[test]
    fn quantizer_examples() {
        let one_bit = AdcConfig::new(1, 1.0, 1.0).unwrap();
        assert_eq!(quantize(Complex64::new(0.7, -0.2), &one_bit), Complex64::new(0.5, -0.5));

        let cfg = AdcConfig::new(4, 1.0, 2.0).unwrap();
        let q = quantize(Complex64::new(10.0, -10.0), &cfg);
        assert_relative_eq!(q.re, cfg.max_code());
        assert_relative_eq!(q.im, -cfg.max_code());
        assert!(is_overload_code(q, &cfg));

        // Codebook points are fixed points.
        for k in 0..cfg.levels() {
            let v = cfg.step() * (k as f64 - 8.0 + 0.5);
            let c = Complex64::new(v, -v);
            assert_eq!(quantize(c, &cfg), c);
        }
    }

    #[test]
    fn quantizer_codebook_size() {
        let cfg = AdcConfig::new(3, 0.8, 2.0).unwrap();
        let mut codes = std::collections::BTreeSet::new();
        for k in -2000..=2000 {
            let q = quantize(Complex64::new(k as f64 * 1e-3, 0.0), &cfg);
            codes.insert((q.re * 1e12).round() as i64);
        }
        assert_eq!(codes.len(), 8);
    }

    #[test]
    fn loading_single_grid_point() {
        let x: Vec<Complex64> = (0..100).map(|k| Complex64::from_polar(1.0, k as f64)).collect();
        assert_eq!(optimize_loading_fraction(&x, 4, &[2.5]).unwrap().0, 2.5);
        assert!(optimize_loading_fraction(&[], 4, &[2.5]).is_err());
        assert!(optimize_loading_fraction(&x, 4, &[]).is_err());
    }

    fn gaussian(n: usize, seed_value: u64) -> Vec<Complex64> {
        let mut rng = seed::rng(seed_value);
        (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) / 2f64.sqrt()
            })
            .collect()
    }

    #[test]
    fn twelve_bits_near_lossless() {
        // Bounded constellation: only granular noise remains at 12 bits.
        let alphabet = crate::signal::qam_constellation(16).unwrap();
        let mut rng = seed::rng(2);
        let x: Vec<Complex64> = (0..20_000).map(|_| alphabet[rng.random_range(0..16)]).collect();
        let grid: Vec<f64> = (10..=40).map(|k| k as f64 * 0.1).collect();
        let (_, d) = optimize_loading_fraction(&x, 12, &grid).unwrap();
        assert!(d < 1e-5, "d_bar {d}");
    }

    #[test]
    fn gaussian_six_bit_optimum_inside_two_to_four() {
        let x = gaussian(50_000, 3);
        let grid: Vec<f64> = (10..=40).map(|k| k as f64 * 0.1).collect();
        let (f, _) = optimize_loading_fraction(&x, 6, &grid).unwrap();
        assert!(f > 2.0 && f < 4.0, "fraction {f}");
    }

    #[test]
    fn four_bit_optimum_matches_brute_force_scan() {
        let x = gaussian(20_000, 4);
        let grid: Vec<f64> = (10..=40).map(|k| k as f64 * 0.1).collect();
        let (f, d) = optimize_loading_fraction(&x, 4, &grid).unwrap();

        // Independent scan: explicit per-dimension quantizer and closed-form
        // Bussgang residual.
        let rms = (x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64 / 2.0).sqrt();
        let mut best = (f64::NAN, f64::INFINITY);
        for &g in &grid {
            let c = g * rms;
            let step = 2.0 * c / 16.0;
            let q = |v: f64| {
                let k = (v / step).floor().clamp(-8.0, 7.0);
                (k + 0.5) * step
            };
            let (mut sq, mut qq, mut ss) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
            for v in &x {
                let y = Complex64::new(q(v.re), q(v.im));
                sq += y.conj() * v;
                qq += y.norm_sqr();
                ss += v.norm_sqr();
            }
            let dbar = 1.0 - sq.norm_sqr() / (qq * ss);
            if dbar < best.1 {
                best = (g, dbar);
            }
        }
        assert_eq!(f, best.0);
        assert!((d - best.1).abs() < 1e-12);
    }

    #[test]
    fn granular_error_bound_and_monotonicity() {
        let mut rng = seed::rng(8);
        let cfg = AdcConfig::new(5, 0.7, 2.0).unwrap();
        let mut vals: Vec<f64> = (0..20_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = f64::NEG_INFINITY;
        for v in vals {
            let q = quantize(Complex64::new(v, v), &cfg);
            assert!(q.re >= prev);
            prev = q.re;
            if v.abs() < cfg.clip_level {
                assert!((q.re - v).abs() <= cfg.step() / 2.0 + 1e-15);
            }
            assert_eq!(quantize(q, &cfg), q);
        }
    }
}
