//! Acceptance criteria for the linearization chain, each evaluated into a
//! pass/fail [`Verdict`] with the measured numbers attached.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rxlin::channel::{build_channel, random_aoas};
use rxlin::harness::complexity::{loglog_slope, time_recovery};
use rxlin::harness::{run_scenario, summarize, sweep, threshold_crossing, Method, ScenarioConfig, SweepAxis};
use rxlin::impairments::{lna, lna_params_from_spec, quantize, AdcConfig, LnaMode};
use rxlin::linearize::{per_antenna_inverse, saturation_recovery, SatRecoveryConfig};
use rxlin::metrics::{bussgang_distortion, link_budget};
use rxlin::{seed, Complex64, Result};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}] {}: {} ({:.1} s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed_s
        )
    }
}

/// Reference scenario: default array, users and LNA gain, 6-bit ADC,
/// -43 dBm total interferer power, 20 trials of 5e4 samples.
pub fn reference_config() -> ScenarioConfig {
    ScenarioConfig {
        trials: 20,
        master_seed: 2024,
        record_wall_time: false,
        ..ScenarioConfig::default()
    }
}

fn mean_of(rows: &[rxlin::harness::ResultRow], method: Method) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.d_bar_db).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Quantization-only floor: linear LNA, method none.
pub fn quantization_floor(base: &ScenarioConfig) -> Result<f64> {
    let mut cfg = base.clone();
    cfg.lna.mode = LnaMode::Linear;
    cfg.methods = vec![Method::None];
    Ok(mean_of(&run_scenario(&cfg)?, Method::None))
}

fn timed<F: FnOnce() -> Result<(bool, String)>>(id: u8, title: &'static str, f: F) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Verdict {
        id,
        title,
        pass,
        detail,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

fn fmt_crossing(c: Option<f64>) -> String {
    c.map_or("none".to_string(), |v| format!("{v:.0} dBm"))
}

/// IIP3 relaxation: gap between the threshold crossings of the uncompensated
/// and compensated chains for clip-only and poly-only LNAs.
pub fn criterion_1(base: &ScenarioConfig) -> Verdict {
    timed(1, "IIP3 relaxation 9 +/- 3 dB", || {
        let start = Instant::now();
        let iip3: Vec<f64> = (0..=12).map(|k| -40.0 + 2.0 * k as f64).collect();
        let floor = quantization_floor(base)?;
        let mut pass = true;
        let mut parts = vec![format!("floor {floor:.2} dB")];
        for (mode, comp) in [
            (LnaMode::ClipOnly, Method::SatRecovery),
            (LnaMode::PolyOnly, Method::Beamspace),
        ] {
            let mut cfg = base.clone();
            cfg.lna.mode = mode;
            cfg.methods = vec![Method::None, comp];
            let summary = summarize(&sweep(&cfg, SweepAxis::Iip3, &iip3)?);
            let un = threshold_crossing(&summary, Method::None, floor, 3.0);
            let co = threshold_crossing(&summary, comp, floor, 3.0);
            let gap = match (un, co) {
                (Some(u), Some(c)) => Some(u - c),
                _ => None,
            };
            let ok = gap.is_some_and(|g| (6.0..=12.0).contains(&g));
            pass &= ok;
            parts.push(format!(
                "{mode:?}: none crosses at {}, {comp} at {}, gap {}",
                fmt_crossing(un),
                fmt_crossing(co),
                gap.map_or("n/a".into(), |g| format!("{g:.0} dB")),
            ));
        }
        let runtime = start.elapsed().as_secs_f64();
        pass &= runtime < 600.0;
        parts.push(format!("runtime {runtime:.0} s (limit 600 s)"));
        Ok((pass, parts.join("; ")))
    })
}

/// Saturation recovery at IIP3 -30 dBm for 3 and 6 ADC bits.
pub fn criterion_2(base: &ScenarioConfig) -> Verdict {
    timed(2, "saturation-recovery efficacy", || {
        let mut pass = true;
        let mut parts = Vec::new();
        for bits in [3u32, 6] {
            let mut cfg = base.clone();
            cfg.lna.mode = LnaMode::ClipOnly;
            cfg.lna.iip3_dbm = -30.0;
            cfg.adc.as_mut().expect("reference has an ADC").bits = bits;
            cfg.methods = vec![Method::None, Method::SatRecovery];
            let rows = run_scenario(&cfg)?;
            let (none, comp) = (mean_of(&rows, Method::None), mean_of(&rows, Method::SatRecovery));
            let floor = quantization_floor(&cfg)?;
            let gain_ok = comp <= none - 10.0;
            let floor_ok = bits != 6 || comp <= floor + 3.0;
            pass &= gain_ok && floor_ok;
            parts.push(format!(
                "B={bits}: none {none:.2}, recovered {comp:.2}, floor {floor:.2} dB (gain {:.2} dB{})",
                none - comp,
                if gain_ok && floor_ok { "" } else { ", short" }
            ));
        }
        Ok((pass, parts.join("; ")))
    })
}

/// Beam-space LMS against the per-antenna inverse, poly-only LNA.
pub fn criterion_3(base: &ScenarioConfig) -> Verdict {
    timed(3, "beam-space vs per-antenna parity", || {
        let mut cfg = base.clone();
        cfg.lna.mode = LnaMode::PolyOnly;
        cfg.lna.iip3_dbm = -30.0;
        cfg.interferer_total_dbm = -41.0;
        cfg.methods = vec![Method::None, Method::Beamspace, Method::PerAntenna];
        let rows = run_scenario(&cfg)?;
        let none = mean_of(&rows, Method::None);
        let bs = mean_of(&rows, Method::Beamspace);
        let pa = mean_of(&rows, Method::PerAntenna);
        let pass = (bs - pa).abs() <= 2.0 && bs <= none - 5.0 && pa <= none - 5.0;
        Ok((
            pass,
            format!(
                "input -41 dBm: none {none:.2}, beam-space {bs:.2}, per-antenna {pa:.2} dB (|bs - pa| = {:.2}, gains {:.2} / {:.2} dB)",
                (bs - pa).abs(),
                none - bs,
                none - pa
            ),
        ))
    })
}

/// Exact recovery of one clipped antenna per sample with known set and no
/// regularization.
pub fn criterion_4() -> Verdict {
    timed(4, "oracle exact recovery", || {
        let (nr, users) = (64, 8);
        let mut rng = seed::rng(41);
        let aoas = random_aoas(&mut rng, users, nr)?;
        let ch = build_channel(&aoas, nr)?;
        let p = lna_params_from_spec(15.0, -30.0, 50.0)?.clip_only();
        let cfg = SatRecoveryConfig {
            kappa: 0.0,
            ..Default::default()
        };
        let mut samples = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let s: Vec<Complex64> = (0..users)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut x: Vec<Complex64> = (0..nr).map(|n| (0..users).map(|u| ch.h[(n, u)] * s[u]).sum()).collect();
            // Put the knee between the two largest magnitudes so exactly one
            // antenna saturates.
            let mut mags: Vec<(f64, usize)> = x.iter().enumerate().map(|(k, v)| (v.norm(), k)).collect();
            mags.sort_by(|a, b| b.0.total_cmp(&a.0));
            let g = p.v_sat / (mags[0].0 * mags[1].0).sqrt();
            x.iter_mut().for_each(|v| *v *= g);
            samples.push((x, mags[0].1));
        }
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        for (x, k) in &samples {
            let y: Vec<Complex64> = x.iter().map(|&v| lna(v, &p)).collect();
            debug_assert_eq!(
                y.iter()
                    .zip(x)
                    .filter(|(a, b)| (*a - *b * p.beta1).norm() > 0.0)
                    .count(),
                1
            );
            let rec = saturation_recovery(&y, &ch.null_basis, &[*k], &cfg)?;
            let num: f64 = rec
                .corrected
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b * p.beta1).norm_sqr())
                .sum();
            let den: f64 = x.iter().map(|b| (b * p.beta1).norm_sqr()).sum();
            worst = worst.max((num / den).sqrt());
        }
        let t = start.elapsed().as_secs_f64();
        Ok((
            worst < 1e-9 && t < 5.0,
            format!("max relative error {worst:.2e} over 1000 samples in {t:.3} s"),
        ))
    })
}

/// `per_antenna_inverse(lna(x)) == x` below the knee.
pub fn criterion_5() -> Verdict {
    timed(5, "inverse-composition identity", || {
        let start = Instant::now();
        let mut rng = seed::rng(51);
        let mut worst: f64 = 0.0;
        for (gain, iip3) in [(15.0, -30.0), (15.0, -40.0), (15.0, -16.0)] {
            let p = lna_params_from_spec(gain, iip3, 50.0)?;
            for _ in 0..10_000 {
                let x = Complex64::from_polar(p.v_sat * rng.random::<f64>().sqrt(), rng.random_range(-3.2..3.2));
                let z = per_antenna_inverse(lna(x, &p), &p);
                worst = worst.max((z - x).norm() / p.v_sat);
            }
        }
        let t = start.elapsed().as_secs_f64();
        Ok((
            worst < 1e-9 && t < 1.0,
            format!("max |p^-1(p(x)) - x| / v_sat = {worst:.2e} over 3 x 10^4 points in {t:.3} s"),
        ))
    })
}

/// Channel, quantizer and metric invariants.
pub fn criterion_6() -> Verdict {
    timed(6, "algebraic invariants", || {
        let mut rng = seed::rng(61);
        let (nr, users) = (64, 8);
        let (mut nh, mut nn, mut wh) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let ch = build_channel(&random_aoas(&mut rng, users, nr)?, nr)?;
            nh = nh.max((&ch.null_basis * &ch.h).norm());
            let eye_n = nalgebra::DMatrix::<Complex64>::identity(nr - users, nr - users);
            nn = nn.max((&ch.null_basis * ch.null_basis.adjoint() - eye_n).norm());
            let eye_u = nalgebra::DMatrix::<Complex64>::identity(users, users);
            wh = wh.max((&ch.zf * &ch.h - eye_u).norm());
        }
        let channel_ok = nh < 1e-10 && nn < 1e-10 && wh < 1e-10;

        let adc = AdcConfig::new(4, 1.0, 2.0)?;
        let mut vals: Vec<f64> = (0..100_000).map(|_| rng.random_range(-1.5..1.5)).collect();
        let idempotent = vals.iter().all(|&v| {
            let q = quantize(Complex64::new(v, -v), &adc);
            quantize(q, &adc) == q
        });
        vals.sort_by(f64::total_cmp);
        let monotone = vals
            .windows(2)
            .all(|w| quantize(Complex64::new(w[0], 0.0), &adc).re <= quantize(Complex64::new(w[1], 0.0), &adc).re);

        let s: Vec<Complex64> = (0..4096)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let s_hat: Vec<Complex64> = s
            .iter()
            .map(|v| v * 0.8 + Complex64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
            .collect();
        let base = bussgang_distortion(&s, &s_hat)?.d_bar;
        let c = Complex64::from_polar(3.7, 0.9);
        let scaled: Vec<Complex64> = s_hat.iter().map(|v| v * c).collect();
        let scale_err = (bussgang_distortion(&s, &scaled)?.d_bar - base).abs() / base;

        let lb = link_budget(23.0, 12.0, 75.0, 3.0, 10.0);
        let table_ok = lb.rx_dbm == -37.0 && lb.rx_peak_dbm == -27.0;

        let pass = channel_ok && idempotent && monotone && scale_err < 1e-12 && table_ok;
        Ok((
            pass,
            format!(
                "max |NH| {nh:.1e}, |NN^H - I| {nn:.1e}, |WH - I| {wh:.1e}; quantizer idempotent {idempotent}, monotone {monotone}; \
                 scale invariance rel err {scale_err:.1e}; link budget case 1 {}/{} dBm",
                lb.rx_dbm, lb.rx_peak_dbm
            ),
        ))
    })
}

/// Quantization floor against ADC resolution, linear LNA.
pub fn criterion_7(base: &ScenarioConfig) -> Verdict {
    timed(7, "quantization-floor trend", || {
        let mut cfg = base.clone();
        cfg.lna.mode = LnaMode::Linear;
        cfg.methods = vec![Method::None];
        let bits = [3.0, 4.0, 5.0, 6.0];
        let summary = summarize(&sweep(&cfg, SweepAxis::AdcBits, &bits)?);
        let d: Vec<f64> = summary.iter().map(|s| s.mean_d_bar_db).collect();
        let steps: Vec<f64> = d.windows(2).map(|w| w[0] - w[1]).collect();
        let pass = steps.iter().all(|&s| (4.0..=8.0).contains(&s));
        Ok((
            pass,
            format!(
                "D (dB) at B=3..6: {}; per-bit improvement {}",
                d.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", "),
                steps.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
            ),
        ))
    })
}

/// Wall-clock scaling of the recovery solvers against the null-space size.
pub fn criterion_8() -> Verdict {
    timed(8, "complexity scaling", || {
        let dims = [8usize, 24, 56, 120];
        let t = time_recovery(&dims, 8, 7, 4_000_000, 81)?;
        let general = loglog_slope(&t.iter().map(|r| (r.null_dim as f64, r.general_s)).collect::<Vec<_>>())?;
        let rank_one = loglog_slope(&t.iter().map(|r| (r.null_dim as f64, r.rank_one_s)).collect::<Vec<_>>())?;
        let pass = (general - 3.0).abs() <= 0.7 && (rank_one - 1.0).abs() <= 0.5;
        Ok((
            pass,
            format!(
                "general slope {general:.2} (3 +/- 0.7), rank-1 slope {rank_one:.2} (1 +/- 0.5); general {}",
                t.iter()
                    .map(|r| format!("{}:{:.2e}s", r.null_dim, r.general_s))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        ))
    })
}
