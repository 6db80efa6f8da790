//! End-to-end Monte-Carlo chain: waveform, channel, LNA, ADC, compensation,
//! ZF combining and distortion scoring of the weak stream.
//!
//! Every trial derives its seed from `(master_seed, point, trial)`, so the
//! rows are a pure function of the configuration regardless of how trials
//! are scheduled.

pub mod complexity;
mod config;
mod output;

pub use config::{AdcSettings, AoaPolicy, InterfererSplit, LnaSettings, Loading, Method, ScenarioConfig, SweepAxis};
pub use output::{emit_results, read_csv, read_jsonl, write_csv, write_jsonl, OutputFormat};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::channel::{apply_channel, build_channel, random_aoas, MultiUserChannel};
use crate::error::{config_err, Error, Result};
use crate::exec::{for_each_chunk_mut, map_chunks, map_indexed, Execution};
use crate::impairments::{
    is_overload_code, lna_params_from_spec, optimize_loading_fraction, quantize, rms_per_dim, AdcConfig, LnaMode,
    LnaModel, LnaParams,
};
use crate::linearize::saturation::detect_into;
use crate::linearize::{per_antenna_inverse, select_streams, LmsState, ProjectorRecovery};
use crate::metrics::bussgang_distortion;
use crate::seed;
use crate::signal::{dbm_to_mean_square, TransmitFrame};

/// Samples per work item in the per-sample stages.
const CHUNK_SAMPLES: usize = 2048;

/// Reported distortion never drops below this (an exact reconstruction
/// would otherwise give minus infinity).
pub const D_BAR_FLOOR_DB: f64 = -300.0;

/// One scored (sweep point, method, trial) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub method: Method,
    /// Normalized distortion of the stream of interest, dB.
    pub d_bar_db: f64,
    /// Mean number of antennas driven past the LNA knee, per sample.
    pub sat_antennas: f64,
    /// Final LMS tap of the stream of interest (beam-space rows only).
    pub lms_final_weight: Option<Complex64>,
    pub wall_time_s: f64,
    /// Trial seed; rerunning a single trial from it reproduces the row.
    pub seed: u64,
}

/// Trial-mean distortion for one (sweep value, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub method: Method,
    pub mean_d_bar_db: f64,
    pub min_d_bar_db: f64,
    pub max_d_bar_db: f64,
    pub mean_sat_antennas: f64,
    pub trials: usize,
}

/// Impaired array output of one trial, shared by all methods.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub seed: u64,
    pub channel: MultiUserChannel,
    pub frame: TransmitFrame,
    /// Nr x T after LNA and (optionally) ADC.
    pub y: DMatrix<Complex64>,
    pub lna: LnaModel,
    pub adc: Option<AdcConfig>,
    pub sat_antennas: f64,
}

/// Outcome of running one compensation method on a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub d_bar_db: f64,
    pub lms_final_weight: Option<Complex64>,
    pub wall_time_s: f64,
    /// Fraction of samples whose flagged set exceeded the null-space size.
    pub underdetermined_fraction: f64,
}

/// Seed of trial `trial` at sweep point `point`.
pub fn trial_seed(master_seed: u64, point: usize, trial: usize) -> u64 {
    seed::derive(master_seed, &[point as u64, trial as u64])
}

/// Builds the channel and frame, then applies LNA and ADC.
pub fn prepare_trial(cfg: &ScenarioConfig, trial_seed: u64) -> Result<TrialData> {
    cfg.validate()?;
    let exec = cfg.execution;
    let aoas = match &cfg.aoa_policy {
        AoaPolicy::Explicit { aoas } => aoas.clone(),
        AoaPolicy::Random => {
            let mut rng = seed::rng(seed::derive(trial_seed, &[0]));
            random_aoas(&mut rng, cfg.num_users, cfg.nr)?
        }
    };
    let channel = build_channel(&aoas, cfg.nr)?;

    let mut waveform = cfg.waveform.clone();
    waveform.seed = seed::derive(trial_seed, &[1]);
    let frame = TransmitFrame::generate(&waveform, &cfg.user_powers_dbm(), cfg.impedance_ohm)?;
    let mut y = apply_channel(&channel, &frame.samples)?;

    let params = lna_params_from_spec(cfg.lna.gain_db, cfg.lna.iip3_dbm, cfg.impedance_ohm)?;
    let lna = LnaModel::new(params, cfg.lna.mode);
    let nr = cfg.nr;
    let chunk = nr * CHUNK_SAMPLES;
    let counts = map_chunks(y.as_slice(), chunk, exec, |_, block| {
        block.iter().filter(|&&x| lna.saturates(x)).count()
    });
    let sat_antennas = counts.iter().sum::<usize>() as f64 / frame.len() as f64;
    for_each_chunk_mut(y.as_mut_slice(), chunk, exec, |_, block| {
        block.iter_mut().for_each(|v| *v = lna.apply(*v));
    });

    let adc = match &cfg.adc {
        None => None,
        Some(settings) => {
            let fraction = match &settings.loading {
                Loading::Fixed { fraction } => *fraction,
                Loading::Optimize { grid } => {
                    let n = (settings.calibration_samples * nr).min(y.len());
                    optimize_loading_fraction(&y.as_slice()[..n], settings.bits, grid)?.0
                }
            };
            let rms = rms_per_dim(y.iter());
            let adc = AdcConfig::new(settings.bits, 1.0, fraction)?.with_agc(rms)?;
            for_each_chunk_mut(y.as_mut_slice(), chunk, exec, |_, block| {
                block.iter_mut().for_each(|v| *v = quantize(*v, &adc));
            });
            Some(adc)
        }
    };

    Ok(TrialData {
        seed: trial_seed,
        channel,
        frame,
        y,
        lna,
        adc,
        sat_antennas,
    })
}

/// Inverse model used by the per-antenna method.
fn inverse_params(lna: &LnaModel) -> Result<Option<LnaParams>> {
    Ok(match lna.mode {
        LnaMode::Full | LnaMode::ClipOnly => Some(lna.params),
        // The cubic is only invertible up to its turning point; treat that as the knee.
        LnaMode::PolyOnly => Some(lna.params.knee_at_monotone_limit()?),
        LnaMode::Linear => None,
    })
}

/// Applies `g`, then the ZF combiner, chunk by chunk. Returns the combined
/// streams (U x T, column-major) and the number of underdetermined samples.
fn combine_with<M, G>(data: &TrialData, exec: Execution, make: M) -> (Vec<Complex64>, usize)
where
    M: Fn() -> G + Sync + Send,
    G: FnMut(&mut [Complex64]) -> usize,
{
    let nr = data.channel.nr();
    let zf = &data.channel.zf;
    let parts = map_chunks(data.y.as_slice(), nr * CHUNK_SAMPLES, exec, |_, block| {
        let mut buf = block.to_vec();
        let cols = buf.len() / nr;
        let mut g = make();
        let mut flagged = 0;
        for col in buf.chunks_mut(nr) {
            flagged += g(col);
        }
        let s = zf * DMatrix::from_column_slice(nr, cols, &buf);
        (s, flagged)
    });
    let mut out = Vec::with_capacity(data.frame.num_users() * data.frame.len());
    let mut flagged = 0;
    for (s, f) in parts {
        out.extend_from_slice(s.as_slice());
        flagged += f;
    }
    (out, flagged)
}

/// Runs one method on a prepared trial and scores the stream of interest.
pub fn evaluate_method(cfg: &ScenarioConfig, data: &TrialData, method: Method) -> Result<MethodOutcome> {
    let start = Instant::now();
    let exec = cfg.execution;
    let users = data.frame.num_users();
    let mut lms_final_weight = None;
    let (s_hat, flagged) = match method {
        Method::None => combine_with(data, exec, || |_: &mut [Complex64]| 0),
        Method::SatRecovery => {
            let v_max = data
                .lna
                .saturation_level()
                .ok_or_else(|| config_err("sat-recovery needs a saturating LNA mode"))?;
            let threshold = cfg.recovery.threshold(v_max);
            let adc = data.adc.filter(|_| cfg.flag_adc_overload);
            let projector = &data.channel.null_projector;
            let null_dim = data.channel.null_dim();
            let kappa = cfg.recovery.kappa;
            combine_with(data, exec, || {
                let mut rec = ProjectorRecovery::new(projector, null_dim, kappa);
                let mut set = Vec::new();
                move |col: &mut [Complex64]| {
                    detect_into(col, threshold, &mut set);
                    if let Some(adc) = &adc {
                        for (k, v) in col.iter().enumerate() {
                            if is_overload_code(*v, adc) && !set.contains(&k) {
                                set.push(k);
                            }
                        }
                        set.sort_unstable();
                    }
                    rec.recover_in_place(col, &set) as usize
                }
            })
        }
        Method::PerAntenna => match inverse_params(&data.lna)? {
            Some(p) => combine_with(data, exec, || {
                move |col: &mut [Complex64]| {
                    col.iter_mut().for_each(|v| *v = per_antenna_inverse(*v, &p));
                    0
                }
            }),
            None => combine_with(data, exec, || |_: &mut [Complex64]| 0),
        },
        Method::Beamspace => {
            let (mut s_hat, _) = combine_with(data, exec, || |_: &mut [Complex64]| 0);
            let powers: Vec<f64> = data
                .frame
                .per_user_power_dbm
                .iter()
                .map(|&p| dbm_to_mean_square(p, cfg.impedance_ohm))
                .collect();
            let eta = dbm_to_mean_square(cfg.eta_dbm, cfg.impedance_ohm);
            let active = select_streams(&powers, eta);
            let streams: Vec<usize> = (0..users).collect();
            let mut state = LmsState::new(streams, active, 0.0, eta, cfg.lms.regressor);
            let cal = cfg.lms.calibration_len.min(data.frame.len());
            state.calibrate(s_hat[..cal * users].chunks(users), &cfg.lms)?;
            let mut out = vec![Complex64::new(0.0, 0.0); s_hat.len()];
            for _ in 0..cfg.lms.epochs {
                for (src, dst) in s_hat.chunks(users).zip(out.chunks_mut(users)) {
                    state.step_into(src, dst)?;
                }
            }
            lms_final_weight = Some(state.weights[cfg.soi_index]);
            std::mem::swap(&mut s_hat, &mut out);
            (s_hat, 0)
        }
    };
    let soi: Vec<Complex64> = s_hat.iter().skip(cfg.soi_index).step_by(users).copied().collect();
    let report = bussgang_distortion(
        &data
            .frame
            .samples
            .row(cfg.soi_index)
            .iter()
            .copied()
            .collect::<Vec<_>>(),
        &soi,
    )?;
    let d_bar_db = report.d_bar_db.max(D_BAR_FLOOR_DB);
    if !d_bar_db.is_finite() {
        return Err(Error::NonFinite("distortion"));
    }
    Ok(MethodOutcome {
        d_bar_db,
        lms_final_weight,
        wall_time_s: start.elapsed().as_secs_f64(),
        underdetermined_fraction: flagged as f64 / data.frame.len() as f64,
    })
}

/// Rows of one sweep point, ordered by (method, trial).
fn run_point(cfg: &ScenarioConfig, point: usize, sweep_value: f64) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let per_trial = map_indexed(cfg.trials, cfg.execution, |t| -> Result<Vec<ResultRow>> {
        let seed = trial_seed(cfg.master_seed, point, t);
        let data = prepare_trial(cfg, seed)?;
        cfg.methods
            .iter()
            .map(|&m| {
                let out = evaluate_method(cfg, &data, m)?;
                Ok(ResultRow {
                    sweep_value,
                    method: m,
                    d_bar_db: out.d_bar_db,
                    sat_antennas: data.sat_antennas,
                    lms_final_weight: out.lms_final_weight,
                    wall_time_s: if cfg.record_wall_time { out.wall_time_s } else { 0.0 },
                    seed,
                })
            })
            .collect()
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cfg.trials * cfg.methods.len());
    for m in 0..cfg.methods.len() {
        rows.extend(per_trial.iter().map(|trial| trial[m].clone()));
    }
    Ok(rows)
}

/// Runs every trial of the scenario as sweep point 0. `sweep_value` is the
/// total interferer power.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    run_point(cfg, 0, cfg.interferer_total_dbm)
}

/// Runs the scenario at each axis value. Rows are ordered by (value, method),
/// then trial.
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<ResultRow>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    let configs = values.iter().map(|&v| axis.apply(cfg, v)).collect::<Result<Vec<_>>>()?;
    let points = map_indexed(values.len(), cfg.execution, |i| run_point(&configs[i], i, values[i]));
    Ok(points.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// Trial statistics per (sweep value, method), in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, f64)> = Vec::new();
    for r in rows {
        let pos = out
            .iter()
            .position(|(s, _)| s.sweep_value.to_bits() == r.sweep_value.to_bits() && s.method == r.method);
        match pos {
            Some(i) => {
                let (s, sat) = &mut out[i];
                s.trials += 1;
                s.mean_d_bar_db += r.d_bar_db;
                s.min_d_bar_db = s.min_d_bar_db.min(r.d_bar_db);
                s.max_d_bar_db = s.max_d_bar_db.max(r.d_bar_db);
                *sat += r.sat_antennas;
            }
            None => out.push((
                SummaryRow {
                    sweep_value: r.sweep_value,
                    method: r.method,
                    mean_d_bar_db: r.d_bar_db,
                    min_d_bar_db: r.d_bar_db,
                    max_d_bar_db: r.d_bar_db,
                    mean_sat_antennas: 0.0,
                    trials: 1,
                },
                r.sat_antennas,
            )),
        }
    }
    out.into_iter()
        .map(|(mut s, sat)| {
            s.mean_d_bar_db /= s.trials as f64;
            s.mean_sat_antennas = sat / s.trials as f64;
            s
        })
        .collect()
}

/// Smallest swept value whose mean distortion for `method` lies within
/// `margin_db` of `floor_db`, scanning `summary` in ascending value order.
pub fn threshold_crossing(summary: &[SummaryRow], method: Method, floor_db: f64, margin_db: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = summary
        .iter()
        .filter(|s| s.method == method)
        .map(|s| (s.sweep_value, s.mean_d_bar_db))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.into_iter()
        .find(|&(_, d)| d <= floor_db + margin_db)
        .map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::WaveformConfig;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            nr: 16,
            num_users: 4,
            waveform: WaveformConfig {
                symbol_count: 400,
                ..Default::default()
            },
            trials: 3,
            record_wall_time: false,
            ..Default::default()
        }
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..10 {
            for t in 0..10 {
                assert!(seen.insert(trial_seed(7, p, t)));
            }
        }
    }

    #[test]
    fn unimpaired_chain_is_exact() {
        let mut cfg = small();
        cfg.lna.mode = LnaMode::Linear;
        cfg.adc = None;
        cfg.methods = vec![Method::None, Method::PerAntenna];
        let rows = run_scenario(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows {
            assert!(r.d_bar_db < -90.0, "{r:?}");
        }
    }

    #[test]
    fn rows_ordered_by_method_then_trial() {
        let cfg = small();
        let rows = run_scenario(&cfg).unwrap();
        let methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
        assert_eq!(
            methods,
            [Method::None; 3]
                .into_iter()
                .chain([Method::SatRecovery; 3])
                .collect::<Vec<_>>()
        );
        assert_eq!(rows[0].seed, rows[3].seed);
        assert_ne!(rows[0].seed, rows[1].seed);
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let mut cfg = small();
        cfg.methods = vec![Method::None, Method::Beamspace];
        let a = sweep(&cfg, SweepAxis::InputPower, &[-45.0, -43.0]).unwrap();
        let b = sweep(&cfg, SweepAxis::InputPower, &[-45.0, -43.0]).unwrap();
        cfg.execution = Execution::Serial;
        let c = sweep(&cfg, SweepAxis::InputPower, &[-45.0, -43.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let cfg = small();
        let run = run_scenario(&cfg).unwrap();
        let sw = sweep(&cfg, SweepAxis::InputPower, &[cfg.interferer_total_dbm]).unwrap();
        assert_eq!(run, sw);
        assert!(sweep(&cfg, SweepAxis::InputPower, &[]).is_err());
    }

    #[test]
    fn beamspace_rows_carry_weight() {
        let mut cfg = small();
        cfg.lna.mode = LnaMode::PolyOnly;
        cfg.methods = vec![Method::None, Method::Beamspace];
        let rows = run_scenario(&cfg).unwrap();
        assert!(rows
            .iter()
            .filter(|r| r.method == Method::None)
            .all(|r| r.lms_final_weight.is_none()));
        assert!(rows
            .iter()
            .filter(|r| r.method == Method::Beamspace)
            .all(|r| r.lms_final_weight.is_some()));
    }

    #[test]
    fn summary_and_crossing() {
        let mk = |v: f64, m: Method, d: f64| ResultRow {
            sweep_value: v,
            method: m,
            d_bar_db: d,
            sat_antennas: 1.0,
            lms_final_weight: None,
            wall_time_s: 0.0,
            seed: 0,
        };
        let rows = vec![
            mk(-30.0, Method::None, -10.0),
            mk(-30.0, Method::None, -12.0),
            mk(-20.0, Method::None, -30.0),
            mk(-20.0, Method::None, -32.0),
            mk(-10.0, Method::None, -34.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].mean_d_bar_db, -11.0);
        assert_eq!(s[0].trials, 2);
        assert_eq!(threshold_crossing(&s, Method::None, -35.0, 3.0), Some(-10.0));
        assert_eq!(threshold_crossing(&s, Method::None, -33.0, 3.0), Some(-20.0));
        assert_eq!(threshold_crossing(&s, Method::Beamspace, -33.0, 3.0), None);
    }
}
