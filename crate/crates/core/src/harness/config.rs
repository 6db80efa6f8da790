use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{config_err, Error, Result};
use crate::exec::Execution;
use crate::impairments::LnaMode;
use crate::linearize::{LmsConfig, SatRecoveryConfig};
use crate::signal::{WaveformConfig, DEFAULT_IMPEDANCE_OHM};

/// Compensation chain applied after the impairments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// ADC output straight into the ZF combiner.
    None,
    /// Null-space saturation recovery, then ZF.
    SatRecovery,
    /// ZF, then per-stream LMS cancellation of the cubic term.
    Beamspace,
    /// Inverse LNA model per antenna, then ZF.
    PerAntenna,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::SatRecovery, Method::Beamspace, Method::PerAntenna];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::SatRecovery => "sat-recovery",
            Method::Beamspace => "beamspace",
            Method::PerAntenna => "per-antenna",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| config_err(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AoaPolicy {
    /// Fixed angles (radians), one per user.
    Explicit { aoas: Vec<f64> },
    /// Uniform in [-pi/3, pi/3] with `|sin a - sin b| >= 2 / nr`, redrawn
    /// per trial.
    Random,
}

/// How the total interferer power is distributed over the strong users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InterfererSplit {
    /// Equal share for every strong user.
    Equal,
    /// One strong user carries `1 - residual_fraction` of the total; the
    /// others share `residual_fraction` equally.
    Dominant { residual_fraction: f64 },
    /// Explicit per-user powers (dBm at each antenna) for the strong users,
    /// in user order skipping the stream of interest. Overrides the total.
    PerUser { powers_dbm: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LnaSettings {
    pub gain_db: f64,
    pub iip3_dbm: f64,
    pub mode: LnaMode,
}

impl Default for LnaSettings {
    fn default() -> Self {
        LnaSettings {
            gain_db: 15.0,
            iip3_dbm: -30.0,
            mode: LnaMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Loading {
    Fixed {
        fraction: f64,
    },
    /// Grid search of the per-antenna quantization distortion on the
    /// trial's own LNA output.
    Optimize {
        grid: Vec<f64>,
    },
}

impl Default for Loading {
    fn default() -> Self {
        Loading::Optimize {
            grid: (10..=40).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdcSettings {
    pub bits: u32,
    pub loading: Loading,
    /// Samples (per antenna) used for loading optimization.
    pub calibration_samples: usize,
}

impl Default for AdcSettings {
    fn default() -> Self {
        AdcSettings {
            bits: 6,
            loading: Loading::default(),
            calibration_samples: 2000,
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub nr: usize,
    pub num_users: usize,
    /// Index of the weak stream that is scored.
    pub soi_index: usize,
    pub aoa_policy: AoaPolicy,
    /// Total power of the strong users at each antenna, dBm.
    pub interferer_total_dbm: f64,
    pub interferer_split: InterfererSplit,
    pub soi_dbm: f64,
    pub impedance_ohm: f64,
    pub lna: LnaSettings,
    /// `None` bypasses the ADC.
    pub adc: Option<AdcSettings>,
    pub waveform: WaveformConfig,
    pub methods: Vec<Method>,
    pub recovery: SatRecoveryConfig,
    /// Also flag antennas whose ADC output sits on an overload code.
    pub flag_adc_overload: bool,
    pub lms: LmsConfig,
    /// Streams with known power at or above this level (dBm) form the LMS
    /// power regressor.
    pub eta_dbm: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub execution: Execution,
    /// When false, `wall_time_s` is reported as 0 so outputs are
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            nr: 64,
            num_users: 8,
            soi_index: 0,
            aoa_policy: AoaPolicy::Random,
            interferer_total_dbm: -43.0,
            interferer_split: InterfererSplit::Equal,
            soi_dbm: -70.0,
            impedance_ohm: DEFAULT_IMPEDANCE_OHM,
            lna: LnaSettings::default(),
            adc: Some(AdcSettings::default()),
            waveform: WaveformConfig::default(),
            methods: vec![Method::None, Method::SatRecovery],
            recovery: SatRecoveryConfig::default(),
            flag_adc_overload: true,
            lms: LmsConfig::default(),
            eta_dbm: -60.0,
            trials: 20,
            master_seed: 1,
            execution: Execution::Parallel,
            record_wall_time: true,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_users >= self.nr {
            return Err(config_err(format!(
                "need 1 <= users ({}) < antennas ({})",
                self.num_users, self.nr
            )));
        }
        if self.soi_index >= self.num_users {
            return Err(config_err(format!("soi_index {} out of range", self.soi_index)));
        }
        if let AoaPolicy::Explicit { aoas } = &self.aoa_policy {
            if aoas.len() != self.num_users {
                return Err(config_err(format!(
                    "{} explicit AoAs for {} users",
                    aoas.len(),
                    self.num_users
                )));
            }
        }
        match &self.interferer_split {
            InterfererSplit::Dominant { residual_fraction } if !(0.0..1.0).contains(residual_fraction) => {
                return Err(config_err("dominant residual fraction must lie in [0, 1)"));
            }
            InterfererSplit::PerUser { powers_dbm } if powers_dbm.len() != self.num_users - 1 => {
                return Err(config_err(format!(
                    "per-user interferer list has {} entries, expected {}",
                    powers_dbm.len(),
                    self.num_users - 1
                )));
            }
            _ => {}
        }
        if !(self.impedance_ohm > 0.0) {
            return Err(config_err("impedance must be positive"));
        }
        self.waveform.validate()?;
        if let Some(adc) = &self.adc {
            if !(1..=12).contains(&adc.bits) {
                return Err(config_err(format!("ADC bits {} outside [1, 12]", adc.bits)));
            }
            match &adc.loading {
                Loading::Fixed { fraction } if !(*fraction > 0.0 && *fraction <= 4.0) => {
                    return Err(config_err(format!("loading fraction {fraction} outside (0, 4]")));
                }
                Loading::Optimize { grid } if grid.is_empty() || grid.iter().any(|f| !(*f > 0.0 && *f <= 4.0)) => {
                    return Err(config_err("loading grid must be non-empty with values in (0, 4]"));
                }
                _ => {}
            }
            if adc.calibration_samples == 0 {
                return Err(config_err("ADC calibration needs at least one sample"));
            }
        }
        if self.methods.is_empty() {
            return Err(config_err("no methods selected"));
        }
        for m in &self.methods {
            if *m == Method::SatRecovery && matches!(self.lna.mode, LnaMode::PolyOnly | LnaMode::Linear) {
                return Err(config_err(format!(
                    "method sat-recovery needs a saturating LNA, but the LNA mode is {:?}",
                    self.lna.mode
                )));
            }
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(config_err("methods listed more than once"));
        }
        self.recovery.validate()?;
        self.lms.validate()?;
        if self.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        Ok(())
    }

    /// Per-user power at each antenna (dBm), stream of interest included.
    pub fn user_powers_dbm(&self) -> Vec<f64> {
        let strong = self.num_users - 1;
        let total_lin = 10f64.powf(self.interferer_total_dbm / 10.0);
        let strong_powers: Vec<f64> = match &self.interferer_split {
            InterfererSplit::Equal => vec![self.interferer_total_dbm - 10.0 * (strong as f64).log10(); strong],
            InterfererSplit::Dominant { residual_fraction } => {
                let mut v = Vec::with_capacity(strong);
                v.push(10.0 * (total_lin * (1.0 - residual_fraction)).log10());
                if strong > 1 {
                    let each = total_lin * residual_fraction / (strong - 1) as f64;
                    let db = if each > 0.0 {
                        10.0 * each.log10()
                    } else {
                        f64::NEG_INFINITY
                    };
                    v.extend(std::iter::repeat_n(db, strong - 1));
                }
                v
            }
            InterfererSplit::PerUser { powers_dbm } => powers_dbm.clone(),
        };
        let mut out = Vec::with_capacity(self.num_users);
        let mut it = strong_powers.into_iter();
        for u in 0..self.num_users {
            if u == self.soi_index {
                out.push(self.soi_dbm);
            } else {
                out.push(it.next().expect("one power per strong user"));
            }
        }
        out
    }
}

/// Parameter swept by [`super::sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    InputPower,
    Iip3,
    AdcBits,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input-power" | "input_power" => Ok(SweepAxis::InputPower),
            "iip3" => Ok(SweepAxis::Iip3),
            "adc-bits" | "adc_bits" => Ok(SweepAxis::AdcBits),
            _ => Err(config_err(format!(
                "unknown sweep axis '{s}' (input-power | iip3 | adc-bits)"
            ))),
        }
    }
}

impl SweepAxis {
    /// Returns a copy of `cfg` with the axis set to `value`.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut out = cfg.clone();
        match self {
            SweepAxis::InputPower => out.interferer_total_dbm = value,
            SweepAxis::Iip3 => out.lna.iip3_dbm = value,
            SweepAxis::AdcBits => {
                if value.fract() != 0.0 || !(1.0..=12.0).contains(&value) {
                    return Err(config_err(format!(
                        "ADC bit value {value} is not an integer in [1, 12]"
                    )));
                }
                match out.adc.as_mut() {
                    Some(adc) => adc.bits = value as u32,
                    None => return Err(config_err("adc-bits sweep requires an ADC in the scenario")),
                }
            }
        }
        out.validate()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_reference_settings() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.nr, cfg.num_users), (64, 8));
        assert_eq!(cfg.lna.gain_db, 15.0);
        assert_eq!(cfg.waveform.modulation_order, 16);
        assert_eq!(cfg.waveform.oversampling_factor, 5);
        assert_eq!(cfg.soi_dbm, -70.0);
    }

    #[test]
    fn equal_split_sums_to_total() {
        let cfg = ScenarioConfig::default();
        let p = cfg.user_powers_dbm();
        assert_eq!(p[0], -70.0);
        let total: f64 = p[1..].iter().map(|v| 10f64.powf(v / 10.0)).sum();
        assert!((10.0 * total.log10() - -43.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_split() {
        let cfg = ScenarioConfig {
            interferer_split: InterfererSplit::Dominant { residual_fraction: 0.1 },
            ..Default::default()
        };
        let p = cfg.user_powers_dbm();
        let total: f64 = p[1..].iter().map(|v| 10f64.powf(v / 10.0)).sum();
        assert!((10.0 * total.log10() - -43.0).abs() < 1e-12);
        assert!((p[1] - (-43.0 + 10.0 * 0.9f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_method() {
        let mut cfg = ScenarioConfig::default();
        cfg.lna.mode = LnaMode::PolyOnly;
        cfg.methods = vec![Method::SatRecovery];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("sat-recovery"), "{err}");
    }

    #[test]
    fn json_round_trip_with_partial_fields() {
        let cfg = ScenarioConfig::from_json(
            r#"{"nr": 32, "num_users": 4, "methods": ["none", "per-antenna"], "lna": {"mode": "poly-only"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.nr, 32);
        assert_eq!(cfg.lna.gain_db, 15.0);
        assert_eq!(cfg.lna.mode, LnaMode::PolyOnly);
        assert_eq!(cfg.methods, vec![Method::None, Method::PerAntenna]);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
        assert!(ScenarioConfig::from_json(r#"{"nr": 4, "num_users": 4}"#).is_err());
    }

    #[test]
    fn axis_apply() {
        let cfg = ScenarioConfig::default();
        assert_eq!(SweepAxis::Iip3.apply(&cfg, -20.0).unwrap().lna.iip3_dbm, -20.0);
        assert_eq!(SweepAxis::AdcBits.apply(&cfg, 4.0).unwrap().adc.unwrap().bits, 4);
        assert!(SweepAxis::AdcBits.apply(&cfg, 4.5).is_err());
        assert_eq!("iip3".parse::<SweepAxis>().unwrap(), SweepAxis::Iip3);
        assert!("bogus".parse::<SweepAxis>().is_err());
        assert_eq!("per-antenna".parse::<Method>().unwrap(), Method::PerAntenna);
    }
}
