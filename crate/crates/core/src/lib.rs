//! Receiver-side digital linearization for all-digital antenna arrays with
//! nonlinear LNAs and low-resolution ADCs.
//!
//! The chain is: multi-user QAM waveform ([`signal`]) through a line-of-sight
//! ULA channel ([`channel`]), a saturating cubic LNA and a mid-rise ADC
//! ([`impairments`]), then one of the compensation methods in [`linearize`]
//! before zero-forcing. [`metrics`] scores the result and [`harness`] runs
//! seeded Monte-Carlo sweeps.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod exec;
pub mod harness;
pub mod impairments;
pub mod linearize;
pub mod metrics;
pub mod seed;
pub mod signal;

pub use error::{Error, Result};
pub use exec::Execution;
pub use num_complex::Complex64;
