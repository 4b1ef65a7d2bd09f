//! Effective capacity of MIMO block-fading links under statistical queueing
//! constraints.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`]: Gamma-family functions, the confluent hypergeometric
//!   series and Gauss quadrature rules.
//! * [`linalg`]: small dense complex matrices and a Hermitian eigensolver.
//! * [`channel`]: fading channel models, Gram spectra and Monte Carlo
//!   moment estimation.
//! * [`engine`]: finite-SNR effective rate estimation for each transmitter
//!   knowledge regime.
//! * [`asymptotics`]: low-SNR derivatives, energy metrics, sparse wideband
//!   minimum bit energies and high-SNR slope / offset analysis.
//! * [`queue`]: fluid buffer simulation and queue-tail exponent estimation.
//!
//! All Monte Carlo estimators draw sample `i` from a counter-based stream
//! keyed by `(seed, i)`, so results do not depend on the number of worker
//! threads.

// negated comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod channel;
pub mod engine;
mod error;
pub mod linalg;
pub mod queue;
pub mod rng;
pub mod special;
mod stats;

pub use error::{Error, Result};

/// log₂(e).
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;
/// logₑ(2).
pub const LN_2: f64 = std::f64::consts::LN_2;

/// Converts a linear power ratio to decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Converts decibels to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
