//! Digital compensation of LNA distortion.
//!
//! * [`saturation`]: joint recovery of saturated antenna samples from the
//!   channel null space (applied before MIMO combining).
//! * [`beamspace`]: per-stream LMS cancellation of the cubic term after
//!   combining.
//! * [`per_antenna`]: per-RF-chain inversion of the small-signal LNA model,
//!   the conventional baseline.

pub mod beamspace;
pub mod hermitian;
pub mod per_antenna;
pub mod saturation;

pub use beamspace::{beamspace_compensate_step, select_streams, LmsConfig, LmsState, RegressorMode};
pub use per_antenna::per_antenna_inverse;
pub use saturation::{
    detect_saturated_set, saturation_recovery, solve_clipping_noise, ProjectorRecovery, Recovery, SatRecoveryConfig,
    SaturationSets,
};
