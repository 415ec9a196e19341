use thiserror::Error;

use crate::state::Lattice;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice mismatch: {left} vs {right}")]
    LatticeMismatch { left: Lattice, right: Lattice },

    #[error("operator dimension {operator} does not match state dimension {state}")]
    DimensionMismatch { operator: usize, state: usize },

    #[error("position {position} lies outside lattice {lattice}")]
    OutOfLattice { position: i64, lattice: Lattice },

    #[error("step would move amplitude at x={position} off lattice {lattice}")]
    LatticeOverflow { position: i64, lattice: Lattice },

    #[error("non-finite amplitude at x={position}")]
    NonFinite { position: i64 },

    #[error("invalid lattice bounds [{lo}, {hi}]")]
    InvalidLattice { lo: i64, hi: i64 },

    #[error("coin matrix is not unitary (deviation {deviation:e})")]
    NonUnitaryCoin { deviation: f64 },

    #[error("unknown canonical state `{0}`")]
    UnknownState(String),

    #[error("unknown event label `{0}`")]
    UnknownEvent(String),

    #[error("time {0} is outside the two-step protocol")]
    InvalidTime(u32),

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("block removes all amplitude (survival probability {survival:e})")]
    TotalAbsorption { survival: f64 },

    #[error("conditional probability undefined (denominator {denominator:e})")]
    UndefinedConditional { denominator: f64 },

    #[error("probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },

    #[error("exclusivity checks failed for {0:?}")]
    ExclusivityViolation(Vec<String>),

    #[error("invalid optical circuit: {0}")]
    CircuitValidity(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("setup {setup} registered no detected photons")]
    UndefinedEstimate { setup: u8 },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
