//! Photon-pair generation in dispersion-shifted fiber with self-phase-modulation
//! pump leakage, Raman scattering and spontaneous four-wave mixing.
//!
//! - [`units`]: constants, shared domain types, unit conversions
//! - [`propagation`]: SPM spectrum, broadening factor, split-step NLSE
//! - [`leakage`]: photon numbers in filter bands, rejection test, minimum detuning
//! - [`counting`]: gated photon-counting Monte Carlo, coincidences, TAR
//! - [`analysis`]: fringe and power-law fits, expectation-level fringe model
//! - [`pipeline`]: config-driven scenarios behind the CLI

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod units;
pub mod propagation;
pub mod leakage;
pub mod counting;
pub mod analysis;
pub mod config;
pub mod pipeline;

pub use error::{Error, Result};
