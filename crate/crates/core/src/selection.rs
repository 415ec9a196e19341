//! Pre- and post-selected states, position blocking and the counterfactual
//! probabilities that make up the paradox.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Amplitude, CoinState, Lattice, StateVector, PRUNE};
use crate::walk::StepOperator;

/// Named closed-form states of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalState {
    Pre0,
    Pre1,
    Post2,
    Post1,
    PreBar0,
    PreBar5,
    PostBar0,
    PostBar5,
}

impl CanonicalState {
    pub const ALL: [CanonicalState; 8] = [
        CanonicalState::Pre0,
        CanonicalState::Pre1,
        CanonicalState::Post2,
        CanonicalState::Post1,
        CanonicalState::PreBar0,
        CanonicalState::PreBar5,
        CanonicalState::PostBar0,
        CanonicalState::PostBar5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalState::Pre0 => "pre0",
            CanonicalState::Pre1 => "pre1",
            CanonicalState::Post2 => "post2",
            CanonicalState::Post1 => "post1",
            CanonicalState::PreBar0 => "pre_bar0",
            CanonicalState::PreBar5 => "pre_bar5",
            CanonicalState::PostBar0 => "post_bar0",
            CanonicalState::PostBar5 => "post_bar5",
        }
    }

    /// Closed-form coefficients as `(x, coin, weight)`, before the common prefactor.
    fn terms(self) -> (f64, Vec<(i64, CoinState, f64)>) {
        use CoinState::{Minus as M, Plus as P};
        let s5 = 1.0 / 5f64.sqrt();
        match self {
            // (1/√5)[|0,−⟩ + (|2⟩+|4⟩)(|−⟩+|+⟩)]
            CanonicalState::Pre0 => (s5, vec![(0, M, 1.0), (2, M, 1.0), (2, P, 1.0), (4, M, 1.0), (4, P, 1.0)]),
            // (1/√5)[(|1⟩+|3⟩)(|−⟩+|+⟩) + |5,+⟩]
            CanonicalState::Pre1 => (s5, vec![(1, M, 1.0), (1, P, 1.0), (3, M, 1.0), (3, P, 1.0), (5, P, 1.0)]),
            // (1/√5)[|0,−⟩ + (|2⟩+|4⟩)(|−⟩−|+⟩)]
            CanonicalState::Post2 => (s5, vec![(0, M, 1.0), (2, M, 1.0), (2, P, -1.0), (4, M, 1.0), (4, P, -1.0)]),
            // (1/√5)[(|1⟩+|3⟩)(|+⟩−|−⟩) + |5,+⟩]
            CanonicalState::Post1 => (s5, vec![(1, P, 1.0), (1, M, -1.0), (3, P, 1.0), (3, M, -1.0), (5, P, 1.0)]),
            CanonicalState::PreBar0 => (0.5, vec![(2, M, 1.0), (2, P, 1.0), (4, M, 1.0), (4, P, 1.0)]),
            CanonicalState::PreBar5 => (0.5, vec![(1, M, 1.0), (1, P, 1.0), (3, M, 1.0), (3, P, 1.0)]),
            CanonicalState::PostBar0 => (0.5, vec![(2, M, 1.0), (2, P, -1.0), (4, M, 1.0), (4, P, -1.0)]),
            CanonicalState::PostBar5 => (0.5, vec![(1, P, 1.0), (1, M, -1.0), (3, P, 1.0), (3, M, -1.0)]),
        }
    }

    pub fn vector(self, lattice: Lattice) -> Result<StateVector> {
        let (k, terms) = self.terms();
        StateVector::from_terms(lattice, terms.into_iter().map(|(x, c, w)| (x, c, Complex64::new(k * w, 0.0))))
    }
}

impl fmt::Display for CanonicalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CanonicalState::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::UnknownState(s.to_string()))
    }
}

pub fn make_canonical(name: &str, lattice: Lattice) -> Result<StateVector> {
    name.parse::<CanonicalState>()?.vector(lattice)
}

/// Absorb the walker at `position` at time step `time` (0, 1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub position: i64,
    pub time: u32,
}

impl BlockSpec {
    pub fn new(position: i64, time: u32) -> Result<Self> {
        if time > 2 {
            return Err(Error::InvalidTime(time));
        }
        Ok(Self { position, time })
    }

    /// Parses `x,t`.
    pub fn parse(s: &str) -> Result<Self> {
        let (x, t) = s.split_once(',').ok_or_else(|| Error::Parse(format!("block `{s}` is not of the form x,t")))?;
        let x = x.trim().parse().map_err(|_| Error::Parse(format!("bad block position in `{s}`")))?;
        let t = t.trim().parse().map_err(|_| Error::Parse(format!("bad block time in `{s}`")))?;
        Self::new(x, t)
    }
}

impl fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.position, self.time)
    }
}

/// Removes every term at `position`. Returns the surviving state and its squared norm
/// relative to the input.
pub fn block(s: &StateVector, position: i64, renormalize: bool) -> Result<(StateVector, f64)> {
    let lattice = s.lattice();
    if !lattice.contains(position) {
        return Err(Error::OutOfLattice { position, lattice });
    }
    let total = s.norm_sqr();
    let kept = s.filtered(|b| b.position != position);
    let survival = if total > 0.0 { kept.norm_sqr() / total } else { 0.0 };
    if !renormalize {
        return Ok((kept, survival));
    }
    if survival < PRUNE {
        return Err(Error::TotalAbsorption { survival });
    }
    Ok((kept.normalized()?, survival))
}

/// Detection statistics of one run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Probability that the photon survives the block.
    pub survival: f64,
    /// Post-selection probability conditioned on survival.
    pub post_given_survival: f64,
}

/// Evolves `initial` to t=2 with an optional block and projects on `post(2)`.
pub fn selection_outcome(u: &StepOperator, initial: &StateVector, blk: Option<BlockSpec>) -> Result<SelectionOutcome> {
    initial.require_normalized()?;
    let post2 = CanonicalState::Post2.vector(u.lattice())?;
    let mut state = initial.clone();
    let mut survival = 1.0;
    for t in 0..=2u32 {
        if let Some(b) = blk.filter(|b| b.time == t) {
            let (kept, p) = block(&state, b.position, true)?;
            state = kept;
            survival *= p;
        }
        if t < 2 {
            state = u.step(&state)?;
        }
    }
    Ok(SelectionOutcome { survival, post_given_survival: post2.inner(&state)?.norm_sqr() })
}

/// `|⟨post(2)|ψ(2)⟩|²` for the surviving, renormalized photon.
pub fn postselection_probability(u: &StepOperator, initial: &StateVector, blk: Option<BlockSpec>) -> Result<f64> {
    Ok(selection_outcome(u, initial, blk)?.post_given_survival)
}

/// Amplitude `⟨post(2)| U^(2-t) P U^t |pre(0)⟩` with `P` the projector on (or off) position `x`.
fn branch_amplitude(u: &StepOperator, x: i64, t: u32, on_site: bool) -> Result<Amplitude> {
    let lattice = u.lattice();
    let pre0 = CanonicalState::Pre0.vector(lattice)?;
    let post2 = CanonicalState::Post2.vector(lattice)?;
    let at_t = u.evolve(&pre0, t)?;
    let projected = at_t.filtered(|b| (b.position == x) == on_site);
    post2.inner(&u.evolve(&projected, 2 - t)?)
}

/// Probability that an intermediate "is the walker at x?" measurement at time `t`
/// answers YES, given pre-selection `pre(0)` and post-selection `post(2)`.
pub fn counterfactual_probability(u: &StepOperator, x: i64, t: u32) -> Result<f64> {
    if t > 2 {
        return Err(Error::InvalidTime(t));
    }
    let lattice = u.lattice();
    if !lattice.contains(x) {
        return Err(Error::OutOfLattice { position: x, lattice });
    }
    let yes = branch_amplitude(u, x, t, true)?.norm_sqr();
    let no = branch_amplitude(u, x, t, false)?.norm_sqr();
    let denominator = yes + no;
    if denominator < PRUNE {
        return Err(Error::UndefinedConditional { denominator });
    }
    Ok(yes / denominator)
}
