use std::fmt;

use thiserror::Error;

/// Why a key-rate evaluation stopped before producing a key length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    /// The single-photon yield lower bound is zero or negative.
    YieldVanishes,
    /// The Chernoff lower bound on single-photon detections is zero.
    NoSinglePhotonEvents,
    /// Phase error rate bound above one half.
    PhaseErrorTooHigh,
    /// Six-state Z-basis bit error bound above one half.
    BitErrorTooHigh,
    /// Six-state X+Y error sum bound above two.
    ErrorSumTooHigh,
    /// Six-state entropy argument left [0, 1].
    EntropyArgumentOutOfRange,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AbortReason::YieldVanishes => "single-photon yield vanishes",
            AbortReason::NoSinglePhotonEvents => "no single-photon events",
            AbortReason::PhaseErrorTooHigh => "phase error bound exceeds 1/2",
            AbortReason::BitErrorTooHigh => "bit error bound exceeds 1/2",
            AbortReason::ErrorSumTooHigh => "X+Y error sum bound exceeds 2",
            AbortReason::EntropyArgumentOutOfRange => "entropy argument outside [0, 1]",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no clicks, pairing rate undefined")]
    NoClicks,

    #[error("infinite capacity: transmittance equals one")]
    InfiniteCapacity,

    #[error("quadrature did not converge (achieved error {achieved:e}, requested {requested:e})")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("root not bracketed while solving `{what}`")]
    NoRoot { what: &'static str },

    #[error("upper bound diverges")]
    UpperBoundDiverges,

    #[error("negative joint-constraint coefficient {0}")]
    NegativeCoefficient(f64),

    #[error("degenerate decoy intensities")]
    DegenerateDecoy,

    #[error("operation requires the {0} variant")]
    WrongVariant(&'static str),

    #[error("protocol abort: {0}")]
    Abort(AbortReason),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
