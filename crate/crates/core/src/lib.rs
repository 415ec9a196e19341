//! Pre- and post-selected discrete-time quantum walk laboratory.
//!
//! The walk `U = S(1 ⊗ NOT)` has period two. Pre-selecting `pre(0)` and
//! post-selecting `post(2)` forces the walker to be found at `x = 0` at even
//! times and at `x = 5` at odd times, which is turned here into operator-level
//! contextuality checks, a testable inequality, a beam-displacer circuit and a
//! photon-counting simulation of the three experimental setups.

pub mod contextuality;
pub mod error;
pub mod harness;
pub mod optics;

pub mod selection;
pub mod state;
pub mod walk;

pub use error::{Error, Result};
pub use state::{Amplitude, BasisState, CoinState, DenseOperator, Lattice, StateVector};
