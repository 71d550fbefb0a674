//! Joint one-bit symbol-level precoding and IRS phase-shift design for the
//! PSK multiuser MISO downlink, plus a Monte-Carlo BER harness.
//!
//! The transmit block and the IRS phases are designed by alternating between a
//! per-slot one-bit precoder (Huber dual solved by mirror descent, then
//! maximum-block-improvement rounding) and an accelerated projected gradient
//! step on the smoothed worst-margin objective over the unit-modulus set.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod baselines;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod harness;
pub mod phase;
pub mod precoder;
pub mod rng;

pub use error::{Error, Result};
