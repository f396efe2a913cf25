//! Implied-temperature alignment of investment portfolios.
//!
//! The crate couples a FaIR-type simple climate model with Bayesian
//! calibration (delayed-rejection adaptive Metropolis), Monte-Carlo
//! propagation of parameter and emission uncertainty, an emission-intensity
//! upscaling model for portfolios, and a small neural-network emulator.
//!
//! See the `examples/` directory for one runnable program per capability.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod calibration;
pub mod emulator;
pub mod error;
pub mod fair;
pub mod gases;
pub mod scenario;
pub mod socioecon;
pub mod uncertainty;

pub use bundle::DataBundle;
pub use error::{Error, Result};
