//! Sensing with random communication signals.
//!
//! The crate models how i.i.d. data payloads perturb radar sensing metrics and
//! provides three transmitter-side remedies: Nyquist pulse
//! design, kurtosis-constrained probabilistic constellation shaping and MIMO
//! precoding under random signaling.
//!
//! Module map:
//!
//! - [`constellation`]: discrete alphabets with point probabilities and moments.
//! - [`waveform`]: SC / OFDM / OTFS / AFDM unitary modulation bases.
//! - [`metrics`]: ACF, PSD, ISL, Monte-Carlo sensing statistics and range profiles.
//! - [`pulse`]: raised-cosine family and ISL-optimal Nyquist pulse design.
//! - [`pcs`]: AWGN mutual information and modified Blahut–Arimoto shaping.
//! - [`precoding`]: LSE/LMMSE errors, ergodic metrics, DDP and DIP precoders.
//! - [`harness`]: JSON experiment configs, pipelines and run manifests.

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constellation;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod pcs;
pub mod precoding;
pub mod pulse;
pub mod seed;
pub mod waveform;

pub use num_complex::Complex64;

pub use constellation::{Constellation, MomentReport};
pub use error::{Error, Result};
pub use metrics::{Acf, AcfMode, SensingStats, SymbolSource};
pub use waveform::{BasisKind, BasisParams, ModulationBasis, SignalBlock};

/// Speed of light used for delay/range conversion (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.998e8;
