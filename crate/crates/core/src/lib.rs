//! Simulation and DSP library for a coherent ground-to-satellite optical
//! uplink whose high-power optical amplifier (HPOA) introduces Kerr
//! nonlinearity.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`]: dual-polarization waveforms, frequency-domain filters,
//!   pulse shaping and matched filtering.
//! * [`shaping`]: the N=4 sphere-shaping distribution matcher realised as a
//!   look-up table, with PAS framing.
//! * [`modem`]: Gray-labelled QAM, TX waveform synthesis, the RX front end
//!   and bitwise soft demapping.
//! * [`channel`]: split-step Fourier propagation through the amplifier and
//!   its pigtail, plus the ASE-limited receiver noise.
//! * [`nlpr`]: nonlinear phase rotation, split between TX and RX.
//! * [`metrics`]: GMI estimation, end-to-end simulation points and the
//!   acceptable-link-loss search.
//! * [`config`] and [`cli`]: run configuration, sweeps and CSV output.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod modem;
pub mod nlpr;
pub mod seed;
pub mod shaping;
pub mod signal;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
