use thiserror::Error;

use crate::atom::StateLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin {0}: must be a non-negative multiple of 1/2")]
    InvalidSpin(f64),

    #[error("unsupported atom: {0}")]
    UnsupportedAtom(String),

    #[error("invalid state {label}: {reason}")]
    InvalidState { label: StateLabel, reason: String },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Too few Floquet eigenvectors live mostly in the central photon block,
    /// which happens at level anticrossings and multiphoton resonances.
    #[error("quasienergy classification failed: {0}")]
    Classification(String),

    #[error("no stationary point bracketed on [{lo}, {hi}] G")]
    NoStationaryPoint { lo: f64, hi: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
