//! Finite-key secret-key rates for mode-pairing quantum key distribution,
//! in its original form and with the six-state refinement of the phase
//! error estimate.
//!
//! The pipeline runs bottom-up: [`channel`] gives per-round click
//! probabilities, [`stats`] turns them into expected counts per intensity
//! class, [`decoy`] bounds the single-photon quantities using the Chernoff
//! machinery in [`bounds`], and [`keyrate`] assembles the key length.
//! [`optimize`] searches the intensity and window parameters per distance
//! and [`mc`] is an event-level simulation of the protocol used to validate
//! the analytic counts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod config;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod mc;
pub mod optimize;
pub mod quadrature;
pub mod stats;

pub use channel::{ChannelParams, IntensityProfile, Level, MisalignmentParams};
pub use error::{AbortReason, Error, Result};
pub use keyrate::{compute_rate, solve_xi, KeyRateResult, SecurityBudget};
pub use stats::{expected_counts, ExpectedCounts, IntensityClass, ProtocolConfig, Variant};
