//! Path-encoded Jones-calculus circuits: loading, validation and propagation.
//!
//! A circuit is an ordered list of stages. Each stage holds elements acting on
//! disjoint paths; a beam displacer spans the whole beam and sits alone in its
//! stage. Stages may be tagged with a *plane* name (`t0`, `t1`, ...) at which the
//! path ↔ walker-position map in `position_map` applies. Coin `+` is H, coin `−` is V.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::element::{apply_real, hwp_matrix, Displacement, HwpConvention, Jones, OpticalElement, H, V};
use crate::error::{Error, Result};
use crate::selection::BlockSpec;
use crate::state::{BasisState, CoinState, Lattice, StateVector, PRUNE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::H => H,
            Polarization::V => V,
        }
    }

    pub fn from_coin(c: CoinState) -> Self {
        match c {
            CoinState::Plus => Polarization::H,
            CoinState::Minus => Polarization::V,
        }
    }

    pub fn coin(self) -> CoinState {
        match self {
            Polarization::H => CoinState::Plus,
            Polarization::V => CoinState::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: i64,
    pub polarization: Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<String>,
    pub elements: Vec<OpticalElement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalCircuit {
    pub paths: Vec<i64>,
    pub input: InputSpec,
    pub stages: Vec<Stage>,
    /// Plane name → list of `[path, position]` pairs.
    pub position_map: BTreeMap<String, Vec<(i64, i64)>>,
    pub post_port: String,
}

/// Amplitudes per path, keyed by path label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathState {
    pub modes: BTreeMap<i64, Jones>,
}

impl PathState {
    pub fn single(path: i64, pol: Polarization) -> Self {
        let mut j = [Complex64::new(0.0, 0.0); 2];
        j[pol.index()] = Complex64::new(1.0, 0.0);
        Self { modes: BTreeMap::from([(path, j)]) }
    }

    pub fn amplitude(&self, path: i64, pol: Polarization) -> Complex64 {
        self.modes.get(&path).map(|j| j[pol.index()]).unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.modes.values().map(|j| j[H].norm_sqr() + j[V].norm_sqr()).sum()
    }

    pub fn inner(&self, other: &PathState) -> Complex64 {
        self.modes.iter().filter_map(|(p, a)| other.modes.get(p).map(|b| a[H].conj() * b[H] + a[V].conj() * b[V])).sum()
    }

    fn prune(&mut self) {
        self.modes.retain(|_, j| j[H].norm() >= PRUNE || j[V].norm() >= PRUNE);
    }
}

/// One concrete setting of every imperfect degree of freedom.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Realization {
    /// Added to each HWP angle, in circuit order.
    pub angle_offsets_deg: Vec<f64>,
    /// Per BD in circuit order: flip the sign of the displaced beam.
    pub bd_flips: Vec<bool>,
    /// Static phase added to a path after every BD.
    pub path_phases: BTreeMap<i64, f64>,
    pub convention: HwpConvention,
}

/// Result of pushing a state through (part of) a circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub output: PathState,
    pub ports: BTreeMap<String, f64>,
    pub lost: f64,
    pub planes: BTreeMap<String, PathState>,
    /// Per BD crossed: whether displaced light landed on a path already carrying V.
    pub merges: Vec<bool>,
}

impl OpticalCircuit {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: OpticalCircuit = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::CircuitValidity(m));
        let declared: BTreeSet<i64> = self.paths.iter().copied().collect();
        if declared.len() != self.paths.len() {
            return bad("duplicate path labels".into());
        }
        if !declared.contains(&self.input.path) {
            return bad(format!("input path {} is not declared", self.input.path));
        }
        let mut ports = BTreeSet::new();
        let mut planes = BTreeSet::from(["input".to_string()]);
        for (i, stage) in self.stages.iter().enumerate() {
            let label = stage.name.clone().unwrap_or_else(|| format!("#{i}"));
            if let Some(p) = &stage.plane {
                if !planes.insert(p.clone()) {
                    return bad(format!("plane `{p}` defined twice"));
                }
            }
            let has_bd = stage.elements.iter().any(|e| matches!(e, OpticalElement::Bd { .. }));
            if has_bd && stage.elements.len() != 1 {
                return bad(format!("stage {label}: a beam displacer must be alone in its stage"));
            }
            let mut used = BTreeSet::new();
            for e in &stage.elements {
                match e {
                    OpticalElement::Hwp { theta_deg, .. } if !theta_deg.is_finite() => {
                        return bad(format!("stage {label}: non-finite plate angle"));
                    }
                    OpticalElement::Phase { phi, .. } if !phi.is_finite() => {
                        return bad(format!("stage {label}: non-finite phase"));
                    }
                    OpticalElement::Bd { displacement: Displacement::Map(m), .. } => {
                        let targets: BTreeSet<i64> = m.iter().map(|(_, t)| *t).collect();
                        if targets.len() != m.len() {
                            return bad(format!("stage {label}: displacement map is not injective"));
                        }
                        for (from, to) in m {
                            if !declared.contains(from) || !declared.contains(to) {
                                return bad(format!("stage {label}: displacement {from}→{to} leaves the circuit"));
                            }
                        }
                    }
                    OpticalElement::Pbs { transmit_port, reflect_port, .. } => {
                        ports.insert(transmit_port.clone());
                        ports.insert(reflect_port.clone());
                    }
                    _ => {}
                }
                for p in e.paths().unwrap_or_default() {
                    if !declared.contains(&p) {
                        return bad(format!("stage {label}: path {p} is not declared"));
                    }
                    if !used.insert(p) {
                        return bad(format!("stage {label}: two elements act on path {p}"));
                    }
                }
            }
        }
        if !ports.contains(&self.post_port) {
            return bad(format!("post-selection port `{}` is not produced by any PBS", self.post_port));
        }
        for (plane, pairs) in &self.position_map {
            if !planes.contains(plane) {
                return bad(format!("position map refers to unknown plane `{plane}`"));
            }
            let ps: BTreeSet<i64> = pairs.iter().map(|(p, _)| *p).collect();
            let xs: BTreeSet<i64> = pairs.iter().map(|(_, x)| *x).collect();
            if ps.len() != pairs.len() || xs.len() != pairs.len() {
                return bad(format!("position map `{plane}` is not one-to-one"));
            }
            if let Some(p) = ps.iter().find(|p| !declared.contains(p)) {
                return bad(format!("position map `{plane}` uses undeclared path {p}"));
            }
        }
        Ok(())
    }

    pub fn hwp_count(&self) -> usize {
        self.elements().filter(|e| matches!(e, OpticalElement::Hwp { .. })).count()
    }

    pub fn bd_count(&self) -> usize {
        self.elements().filter(|e| matches!(e, OpticalElement::Bd { .. })).count()
    }

    pub fn elements(&self) -> impl Iterator<Item = &OpticalElement> {
        self.stages.iter().flat_map(|s| s.elements.iter())
    }

    pub fn hwp_named(&self, name: &str) -> Option<f64> {
        self.elements().find_map(|e| match e {
            OpticalElement::Hwp { name: Some(n), theta_deg, .. } if n == name => Some(*theta_deg),
            _ => None,
        })
    }

    /// Sets the angle of every plate listed in `angles`.
    pub fn with_angles(&self, angles: &BTreeMap<String, f64>) -> Self {
        let mut out = self.clone();
        for stage in &mut out.stages {
            for e in &mut stage.elements {
                if let OpticalElement::Hwp { name: Some(n), theta_deg, .. } = e {
                    if let Some(a) = angles.get(n) {
                        *theta_deg = *a;
                    }
                }
            }
        }
        out
    }

    /// Index of the stage that ends at `plane`. `input` is before stage 0.
    pub fn plane_end(&self, plane: &str) -> Result<usize> {
        if plane == "input" {
            return Ok(0);
        }
        self.stages
            .iter()
            .position(|s| s.plane.as_deref() == Some(plane))
            .map(|i| i + 1)
            .ok_or_else(|| Error::CircuitValidity(format!("no plane `{plane}`")))
    }

    fn plane_pairs(&self, plane: &str) -> Result<&[(i64, i64)]> {
        self.position_map
            .get(plane)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::CircuitValidity(format!("no position map for plane `{plane}`")))
    }

    pub fn path_of(&self, plane: &str, position: i64) -> Result<i64> {
        self.plane_pairs(plane)?
            .iter()
            .find(|(_, x)| *x == position)
            .map(|(p, _)| *p)
            .ok_or_else(|| Error::CircuitValidity(format!("position {position} has no path at plane `{plane}`")))
    }

    pub fn position_of(&self, plane: &str, path: i64) -> Result<i64> {
        self.plane_pairs(plane)?
            .iter()
            .find(|(p, _)| *p == path)
            .map(|(_, x)| *x)
            .ok_or_else(|| Error::CircuitValidity(format!("path {path} has no position at plane `{plane}`")))
    }

    /// Encodes a walker state at `plane`: coin `+` → H, coin `−` → V.
    pub fn encode(&self, plane: &str, s: &StateVector) -> Result<PathState> {
        let mut out = PathState::default();
        for (b, a) in s.terms() {
            let p = self.path_of(plane, b.position)?;
            let slot = out.modes.entry(p).or_default();
            slot[Polarization::from_coin(b.coin).index()] += a;
        }
        Ok(out)
    }

    pub fn decode(&self, plane: &str, ps: &PathState, lattice: Lattice) -> Result<StateVector> {
        let mut out = StateVector::empty(lattice);
        for (p, j) in &ps.modes {
            if j[H].norm() < PRUNE && j[V].norm() < PRUNE {
                continue;
            }
            let x = self.position_of(plane, *p)?;
            for pol in [Polarization::H, Polarization::V] {
                out.add_term(BasisState::new(x, pol.coin()), j[pol.index()])?;
            }
        }
        Ok(out)
    }

    /// Copy of the circuit with an absorbing block at walker position `x`, time `t`.
    pub fn with_block(&self, block: BlockSpec) -> Result<Self> {
        let plane = format!("t{}", block.time);
        let at = self.plane_end(&plane)?;
        let path = self.path_of(&plane, block.position)?;
        let mut out = self.clone();
        out.stages.insert(
            at,
            Stage {
                name: Some(format!("block x={} t={}", block.position, block.time)),
                plane: None,
                elements: vec![OpticalElement::Block { name: None, path }],
            },
        );
        Ok(out)
    }

    pub fn input_state(&self) -> PathState {
        PathState::single(self.input.path, self.input.polarization)
    }

    /// Runs stages `[from, to)` on `state`.
    pub fn run(&self, from: usize, to: usize, state: &PathState, r: &Realization) -> Result<Trace> {
        let declared: BTreeSet<i64> = self.paths.iter().copied().collect();
        let mut hwp_idx = 0usize;
        let mut bd_idx = 0usize;
        for s in &self.stages[..from] {
            for e in &s.elements {
                match e {
                    OpticalElement::Hwp { .. } => hwp_idx += 1,
                    OpticalElement::Bd { .. } => bd_idx += 1,
                    _ => {}
                }
            }
        }
        let mut cur = state.clone();
        let mut ports: BTreeMap<String, f64> = BTreeMap::new();
        let mut lost = 0.0;
        let mut planes = BTreeMap::new();
        let mut merges = Vec::new();
        for stage in &self.stages[from..to] {
            for e in &stage.elements {
                match e {
                    OpticalElement::Hwp { theta_deg, paths, .. } => {
                        let offset = r.angle_offsets_deg.get(hwp_idx).copied().unwrap_or(0.0);
                        hwp_idx += 1;
                        let m = hwp_matrix(theta_deg + offset, r.convention);
                        for p in paths {
                            if let Some(j) = cur.modes.get_mut(p) {
                                *j = apply_real(&m, *j);
                            }
                        }
                    }
                    OpticalElement::Bd { displacement, name } => {
                        let flip = r.bd_flips.get(bd_idx).copied().unwrap_or(false);
                        bd_idx += 1;
                        let (next, merged) = displace(&cur, displacement, flip, &declared, name.as_deref())?;
                        cur = next;
                        merges.push(merged);
                        for (p, phi) in &r.path_phases {
                            if *phi != 0.0 {
                                if let Some(j) = cur.modes.get_mut(p) {
                                    let k = Complex64::from_polar(1.0, *phi);
                                    *j = [j[H] * k, j[V] * k];
                                }
                            }
                        }
                    }
                    OpticalElement::Phase { phi, path, .. } => {
                        if *phi != 0.0 {
                            if let Some(j) = cur.modes.get_mut(path) {
                                let k = Complex64::from_polar(1.0, *phi);
                                *j = [j[H] * k, j[V] * k];
                            }
                        }
                    }
                    OpticalElement::Block { path, .. } => {
                        if let Some(j) = cur.modes.remove(path) {
                            lost += j[H].norm_sqr() + j[V].norm_sqr();
                        }
                    }
                    OpticalElement::Pbs { path, transmit_port, reflect_port, .. } => {
                        if let Some(j) = cur.modes.remove(path) {
                            *ports.entry(transmit_port.clone()).or_default() += j[H].norm_sqr();
                            *ports.entry(reflect_port.clone()).or_default() += j[V].norm_sqr();
                        }
                    }
                }
            }
            cur.prune();
            if let Some(p) = &stage.plane {
                planes.insert(p.clone(), cur.clone());
            }
        }
        for (p, j) in &cur.modes {
            for (pol, tag) in [(H, "H"), (V, "V")] {
                let i = j[pol].norm_sqr();
                if i > 0.0 {
                    *ports.entry(format!("path{p}:{tag}")).or_default() += i;
                }
            }
        }
        Ok(Trace { output: cur, ports, lost, planes, merges })
    }

    /// Runs the whole circuit.
    pub fn run_all(&self, state: &PathState, r: &Realization) -> Result<Trace> {
        self.run(0, self.stages.len(), state, r)
    }
}

fn displace(
    state: &PathState,
    d: &Displacement,
    flip: bool,
    declared: &BTreeSet<i64>,
    name: Option<&str>,
) -> Result<(PathState, bool)> {
    let who = name.unwrap_or("BD");
    let zero = Complex64::new(0.0, 0.0);
    let mut out = PathState::default();
    for (p, j) in &state.modes {
        if j[V] != zero {
            out.modes.entry(*p).or_default()[V] += j[V];
        }
    }
    let mut written: BTreeSet<i64> = BTreeSet::new();
    let mut merged = false;
    for (p, j) in &state.modes {
        let h = j[H];
        if h.norm() < PRUNE {
            continue;
        }
        let moves = d.moves(*p);
        let to = d.target(*p);
        if !declared.contains(&to) {
            return Err(Error::CircuitValidity(format!(
                "{who}: H light on path {p} displaced off the circuit to {to}"
            )));
        }
        if !written.insert(to) {
            return Err(Error::CircuitValidity(format!("{who}: path collision on H slot of path {to}")));
        }
        let amp = if moves && flip { -h } else { h };
        let slot = out.modes.entry(to).or_default();
        slot[H] += amp;
        merged |= moves && slot[V].norm() >= PRUNE;
    }
    Ok((out, merged))
}

/// Systematic imperfections of the optical setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionModel {
    /// Standard deviation of the Gaussian angle error of every plate, degrees.
    pub hwp_angle_sigma_deg: f64,
    /// Coherence kept between displaced and transmitted beams at each BD.
    pub visibility: f64,
    /// Static phase (radians) added to a path after every BD.
    #[serde(default)]
    pub path_phases: BTreeMap<i64, f64>,
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ImperfectionModel {
    pub fn ideal() -> Self {
        Self { hwp_angle_sigma_deg: 0.0, visibility: 1.0, path_phases: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hwp_angle_sigma_deg >= 0.0 && self.hwp_angle_sigma_deg.is_finite()) {
            return Err(Error::Config(format!(
                "plate sigma {} must be finite and non-negative",
                self.hwp_angle_sigma_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::Config(format!("visibility {} outside [0, 1]", self.visibility)));
        }
        if self.path_phases.values().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite path phase".into()));
        }
        Ok(())
    }

    /// Draws one set of plate errors; BD flips are left to [`expected_trace`].
    pub fn sample<R: Rng + ?Sized>(&self, circuit: &OpticalCircuit, rng: &mut R) -> Realization {
        let angle_offsets_deg = (0..circuit.hwp_count())
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                self.hwp_angle_sigma_deg * z
            })
            .collect();
        Realization {
            angle_offsets_deg,
            bd_flips: Vec::new(),
            path_phases: self.path_phases.clone(),
            convention: HwpConvention::Standard,
        }
    }
}

/// Port intensities and loss averaged over BD dephasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedTrace {
    pub ports: BTreeMap<String, f64>,
    pub lost: f64,
}

impl ExpectedTrace {
    pub fn port(&self, name: &str) -> f64 {
        self.ports.get(name).copied().unwrap_or(0.0)
    }

    pub fn detected(&self) -> f64 {
        self.ports.values().sum()
    }
}

/// Every sign pattern of the merging BDs with its outcome, ready to be
/// weighted for any visibility.
///
/// At a merging BD the displaced beam picks up a sign flip with probability
/// `(1 − V)/2`, which scales the cross-terms between the merged beams by `V`.
/// BDs that only split are left coherent.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingPatterns {
    patterns: Vec<(u32, ExpectedTrace)>,
    merging: usize,
}

impl DephasingPatterns {
    pub fn new(circuit: &OpticalCircuit, input: &PathState, base: &Realization) -> Result<Self> {
        let ideal = circuit.run_all(input, base)?;
        let merge_at: Vec<usize> = ideal.merges.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect();
        let n_bd = ideal.merges.len();
        let mut patterns = Vec::with_capacity(1 << merge_at.len());
        patterns.push((0, ExpectedTrace { ports: ideal.ports, lost: ideal.lost }));
        for mask in 1u32..(1u32 << merge_at.len()) {
            let mut flips = vec![false; n_bd];
            for (bit, bd) in merge_at.iter().enumerate() {
                flips[*bd] = mask >> bit & 1 == 1;
            }
            let r = Realization { bd_flips: flips, ..base.clone() };
            let t = circuit.run_all(input, &r)?;
            patterns.push((mask, ExpectedTrace { ports: t.ports, lost: t.lost }));
        }
        Ok(Self { patterns, merging: merge_at.len() })
    }

    pub fn merging_bds(&self) -> usize {
        self.merging
    }

    pub fn mix(&self, visibility: f64) -> ExpectedTrace {
        if visibility == 1.0 {
            return self.patterns[0].1.clone();
        }
        let p = (1.0 - visibility) / 2.0;
        let mut ports: BTreeMap<String, f64> = BTreeMap::new();
        let mut lost = 0.0;
        for (mask, t) in &self.patterns {
            let k = mask.count_ones() as i32;
            let w = p.powi(k) * (1.0 - p).powi(self.merging as i32 - k);
            if w == 0.0 {
                continue;
            }
            for (name, v) in &t.ports {
                *ports.entry(name.clone()).or_default() += w * v;
            }
            lost += w * t.lost;
        }
        ExpectedTrace { ports, lost }
    }
}

pub fn expected_trace(
    circuit: &OpticalCircuit,
    input: &PathState,
    base: &Realization,
    visibility: f64,
) -> Result<ExpectedTrace> {
    Ok(DephasingPatterns::new(circuit, input, base)?.mix(visibility))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagation {
    /// Output of the fully coherent branch with the sampled plate angles.
    pub output: PathState,
    /// Port intensities averaged over BD dephasing.
    pub ports: BTreeMap<String, f64>,
    pub lost: f64,
    pub post_intensity: f64,
}

/// Propagates `input` through `circuit`. Plate errors are drawn from `seed`.
pub fn propagate(
    circuit: &OpticalCircuit,
    input: &PathState,
    imperfections: Option<&ImperfectionModel>,
    seed: u64,
) -> Result<Propagation> {
    circuit.validate()?;
    let (base, visibility) = match imperfections {
        None => (Realization::default(), 1.0),
        Some(m) => {
            m.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (m.sample(circuit, &mut rng), m.visibility)
        }
    };
    let coherent = circuit.run_all(input, &base)?;
    let expected = expected_trace(circuit, input, &base, visibility)?;
    Ok(Propagation {
        output: coherent.output,
        post_intensity: expected.port(&circuit.post_port),
        ports: expected.ports,
        lost: expected.lost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn tiny(stages: Vec<Stage>) -> OpticalCircuit {
        OpticalCircuit {
            paths: (0..6).collect(),
            input: InputSpec { path: 0, polarization: Polarization::H },
            stages: stages
                .into_iter()
                .chain([Stage {
                    name: None,
                    plane: None,
                    elements: vec![OpticalElement::Pbs {
                        name: None,
                        path: 5,
                        transmit_port: "post".into(),
                        reflect_port: "rest".into(),
                    }],
                }])
                .collect(),
            position_map: BTreeMap::new(),
            post_port: "post".into(),
        }
    }

    fn hwp(theta: f64, paths: Vec<i64>) -> Stage {
        Stage { name: None, plane: None, elements: vec![OpticalElement::Hwp { name: None, theta_deg: theta, paths }] }
    }

    fn bd(d: Displacement) -> Stage {
        Stage { name: None, plane: None, elements: vec![OpticalElement::Bd { name: None, displacement: d }] }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = tiny(vec![]);
        let input = PathState::single(0, Polarization::H);
        let t = c.run(0, 0, &input, &Realization::default()).unwrap();
        assert_eq!(t.output, input);
    }

    #[test]
    fn hwp_45_flips_h_to_v() {
        let c = tiny(vec![hwp(45.0, vec![0])]);
        let t = c.run(0, 1, &PathState::single(0, Polarization::H), &Realization::default()).unwrap();
        assert!(t.output.amplitude(0, Polarization::H).norm() < 1e-15);
        assert!((t.output.amplitude(0, Polarization::V) - one()).norm() < 1e-15);
    }

    #[test]
    fn bd_displaces_only_h() {
        let c = tiny(vec![hwp(22.5, vec![0]), bd(Displacement::Shift(2))]);
        let t = c.run(0, 2, &PathState::single(0, Polarization::H), &Realization::default()).unwrap();
        let k = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t.output.amplitude(0, Polarization::V).re - k).abs() < 1e-15);
        assert!((t.output.amplitude(2, Polarization::H).re - k).abs() < 1e-15);
        assert!((t.output.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_off_circuit_is_rejected() {
        let c = tiny(vec![bd(Displacement::Shift(10))]);
        let err = c.run(0, 1, &PathState::single(0, Polarization::H), &Realization::default()).unwrap_err();
        assert!(matches!(err, Error::CircuitValidity(_)));
    }

    #[test]
    fn path_collision_is_rejected() {
        // H on 0 moves onto 1 whose own H is not displaced
        let c = tiny(vec![hwp(22.5, vec![0]), bd(Displacement::Map(vec![(0, 1)]))]);
        let mut input = PathState::single(0, Polarization::H);
        input.modes.insert(1, [one(), Complex64::new(0.0, 0.0)]);
        let err = c.run(0, 2, &input, &Realization::default()).unwrap_err();
        assert!(matches!(err, Error::CircuitValidity(ref m) if m.contains("collision")), "{err:?}");
    }

    #[test]
    fn validation_catches_structural_errors() {
        let mut c = tiny(vec![]);
        c.stages.insert(
            0,
            Stage {
                name: None,
                plane: None,
                elements: vec![
                    OpticalElement::Block { name: None, path: 1 },
                    OpticalElement::Phase { name: None, phi: 0.0, path: 1 },
                ],
            },
        );
        assert!(c.validate().is_err());
        let mut c = tiny(vec![]);
        c.post_port = "nowhere".into();
        assert!(c.validate().is_err());
        let mut c = tiny(vec![bd(Displacement::Map(vec![(0, 2), (1, 2)]))]);
        assert!(c.validate().is_err());
        c.stages.remove(0);
        c.stages.insert(
            0,
            Stage {
                name: None,
                plane: None,
                elements: vec![
                    OpticalElement::Bd { name: None, displacement: Displacement::Shift(1) },
                    OpticalElement::Block { name: None, path: 1 },
                ],
            },
        );
        assert!(c.validate().is_err());
    }

    #[test]
    fn block_and_pbs_account_for_all_light() {
        let mut c = tiny(vec![hwp(22.5, vec![0]), bd(Displacement::Shift(5))]);
        c.stages.insert(
            2,
            Stage { name: None, plane: None, elements: vec![OpticalElement::Block { name: None, path: 0 }] },
        );
        let t = c.run_all(&PathState::single(0, Polarization::H), &Realization::default()).unwrap();
        assert!((t.lost - 0.5).abs() < 1e-12);
        assert!((t.ports["post"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ideal_imperfections_are_bit_identical() {
        let c = tiny(vec![hwp(13.3, vec![0]), bd(Displacement::Shift(1)), hwp(31.7, vec![1])]);
        let input = c.input_state();
        let a = propagate(&c, &input, None, 1).unwrap();
        let b = propagate(&c, &input, Some(&ImperfectionModel::ideal()), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn visibility_scales_interference() {
        // Mach-Zehnder: split at 22.5°, displace, recombine, analyse at 22.5°
        let c = tiny(vec![
            hwp(22.5, vec![0]),
            bd(Displacement::Shift(1)),
            hwp(45.0, vec![0, 1]),
            bd(Displacement::Map(vec![(0, 1)])),
            hwp(22.5, vec![1]),
            bd(Displacement::Map(vec![(1, 5)])),
        ]);
        let input = c.input_state();
        let model =
            |v: f64| ImperfectionModel { hwp_angle_sigma_deg: 0.0, visibility: v, path_phases: BTreeMap::new() };
        let p1 = propagate(&c, &input, Some(&model(1.0)), 0).unwrap().post_intensity;
        let p0 = propagate(&c, &input, Some(&model(0.0)), 0).unwrap().post_intensity;
        let ph = propagate(&c, &input, Some(&model(0.5)), 0).unwrap().post_intensity;
        assert!((p1 - 1.0).abs() < 1e-12, "{p1}");
        assert!((p0 - 0.5).abs() < 1e-12, "{p0}");
        assert!((ph - 0.75).abs() < 1e-12, "{ph}");
    }
}
