//! The eight Clifton events of the walk, their exclusivity graph, exhaustive
//! non-contextual hidden-variable enumeration, and the KCBS and final inequalities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::CanonicalState;
use crate::state::{Amplitude, DenseOperator, Lattice, StateVector, TOL};
use crate::walk::StepOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventLabel {
    Pre,
    Post,
    Zero,
    Five,
    PreBar0,
    PreBar5,
    PostBar0,
    PostBar5,
}

impl EventLabel {
    /// Canonical vertex order; assignments are enumerated lexicographically in it.
    pub const ALL: [EventLabel; 8] = [
        EventLabel::Pre,
        EventLabel::Post,
        EventLabel::Zero,
        EventLabel::Five,
        EventLabel::PreBar0,
        EventLabel::PreBar5,
        EventLabel::PostBar0,
        EventLabel::PostBar5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventLabel::Pre => "pre",
            EventLabel::Post => "post",
            EventLabel::Zero => "0",
            EventLabel::Five => "5",
            EventLabel::PreBar0 => "pre_bar0",
            EventLabel::PreBar5 => "pre_bar5",
            EventLabel::PostBar0 => "post_bar0",
            EventLabel::PostBar5 => "post_bar5",
        }
    }

    /// Measurement time: events at t=1 carry a `U · U†` conjugation.
    pub fn time(self) -> u32 {
        match self {
            EventLabel::Five | EventLabel::PreBar5 | EventLabel::PostBar5 => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventLabel::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::UnknownEvent(s.to_string()))
    }
}

impl Serialize for EventLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EventLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct EventProjector {
    pub label: EventLabel,
    pub full_form: DenseOperator,
    /// Rank-1 form valid under the fixed pre/post-selection; equals `full_form` for
    /// events without a reduced description.
    pub effective_form: DenseOperator,
}

impl EventProjector {
    pub fn time_tag(&self) -> u32 {
        self.label.time()
    }

    pub fn rank(&self) -> f64 {
        self.full_form.trace().re
    }

    /// `full · effective = effective`.
    pub fn dominance_defect(&self) -> f64 {
        let prod = self.full_form.matmul(&self.effective_form).expect("same lattice");
        prod.minus(&self.effective_form).expect("same lattice").max_norm()
    }
}

fn coin_projector(plus_sign: f64) -> [[Amplitude; 2]; 2] {
    // |c_±⟩ = (|−⟩ ± |+⟩)/√2 in the (MINUS, PLUS) basis
    let h = Complex64::new(0.5, 0.0);
    let off = h * plus_sign;
    [[h, off], [off, h]]
}

fn conjugate(u: &StepOperator, p: &DenseOperator) -> DenseOperator {
    u.dense().matmul(p).and_then(|up| up.matmul(u.dense_adjoint())).expect("same lattice")
}

/// Builds all eight events on `lattice`, which must cover `[-1, 6]`.
pub fn build_events(lattice: Lattice) -> Result<Vec<EventProjector>> {
    if !lattice.covers(-1, 6) {
        return Err(Error::Config(format!("lattice {lattice} must cover [-1, 6] for the event projectors")));
    }
    let u = StepOperator::new(lattice);
    let rank1 = |c: CanonicalState| -> Result<DenseOperator> { DenseOperator::projector_onto(&c.vector(lattice)?) };
    let rank1_at_t1 = |c: CanonicalState| -> Result<DenseOperator> {
        DenseOperator::projector_onto(&u.dense().apply(&c.vector(lattice)?)?)
    };
    let not_at = |x: i64| move |p: i64| if p == x { 0.0 } else { 1.0 };
    let c_plus = coin_projector(1.0);
    let c_minus = coin_projector(-1.0);

    let pre = rank1(CanonicalState::Pre0)?;
    let post = rank1(CanonicalState::Post2)?;
    let zero = DenseOperator::position_projector(lattice, 0)?;
    let five = conjugate(&u, &DenseOperator::position_projector(lattice, 5)?);
    let pre_bar0 = DenseOperator::diagonal_position_tensor(lattice, not_at(0), c_plus);
    let post_bar0 = DenseOperator::diagonal_position_tensor(lattice, not_at(0), c_minus);
    let pre_bar5 = conjugate(&u, &DenseOperator::diagonal_position_tensor(lattice, not_at(5), c_plus));
    let post_bar5 = conjugate(&u, &DenseOperator::diagonal_position_tensor(lattice, not_at(5), c_minus));

    let event = |label, full: DenseOperator, effective: Option<DenseOperator>| EventProjector {
        label,
        effective_form: effective.unwrap_or_else(|| full.clone()),
        full_form: full,
    };
    Ok(vec![
        event(EventLabel::Pre, pre, None),
        event(EventLabel::Post, post, None),
        event(EventLabel::Zero, zero, None),
        event(EventLabel::Five, five, None),
        event(EventLabel::PreBar0, pre_bar0, Some(rank1(CanonicalState::PreBar0)?)),
        event(EventLabel::PreBar5, pre_bar5, Some(rank1_at_t1(CanonicalState::PreBar5)?)),
        event(EventLabel::PostBar0, post_bar0, Some(rank1(CanonicalState::PostBar0)?)),
        event(EventLabel::PostBar5, post_bar5, Some(rank1_at_t1(CanonicalState::PostBar5)?)),
    ])
}

fn find(events: &[EventProjector], label: EventLabel) -> Result<&EventProjector> {
    events.iter().find(|e| e.label == label).ok_or_else(|| Error::UnknownEvent(label.name().to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusivityGraph {
    pub vertices: Vec<EventLabel>,
    pub edges: Vec<(EventLabel, EventLabel)>,
    pub completeness_triples: Vec<[EventLabel; 3]>,
}

impl ExclusivityGraph {
    /// The full eight-event graph: 11 edges and 2 completeness triples.
    pub fn clifton() -> Self {
        use EventLabel::*;
        Self {
            vertices: EventLabel::ALL.to_vec(),
            edges: vec![
                (Pre, PostBar0),
                (Pre, PostBar5),
                (Post, PreBar0),
                (Post, PreBar5),
                (Zero, PreBar0),
                (Zero, PostBar0),
                (Five, PreBar5),
                (Five, PostBar5),
                (Zero, Five),
                (PreBar0, PostBar0),
                (PreBar5, PostBar5),
            ],
            completeness_triples: vec![[PreBar0, Zero, PostBar0], [PreBar5, Five, PostBar5]],
        }
    }

    /// Induced subgraph on `vertices`, with no completeness constraints.
    pub fn induced(&self, vertices: &[EventLabel]) -> Self {
        Self {
            vertices: self.vertices.iter().copied().filter(|v| vertices.contains(v)).collect(),
            edges: self.edges.iter().copied().filter(|(a, b)| vertices.contains(a) && vertices.contains(b)).collect(),
            completeness_triples: Vec::new(),
        }
    }

    /// The KCBS 5-cycle `pre_bar0 – 0 – 5 – pre_bar5 – post – pre_bar0`.
    pub fn kcbs_cycle() -> Self {
        use EventLabel::*;
        Self::clifton().induced(&[PreBar0, Zero, Five, PreBar5, Post])
    }

    pub fn is_edge(&self, a: EventLabel, b: EventLabel) -> bool {
        self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckLevel {
    Full,
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheck {
    pub a: EventLabel,
    pub b: EventLabel,
    pub level: CheckLevel,
    /// `‖Π_a Π_b‖∞`
    pub product_norm: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleCheck {
    pub events: [EventLabel; 3],
    /// `‖ΣΠ − I‖∞`
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorCheck {
    pub event: EventLabel,
    pub hermiticity_defect: f64,
    pub idempotency_defect: f64,
    pub dominance_defect: f64,
    pub rank: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusivityReport {
    pub projectors: Vec<ProjectorCheck>,
    pub edges: Vec<EdgeCheck>,
    pub triples: Vec<TripleCheck>,
    pub all_pass: bool,
}

impl ExclusivityReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> =
            self.projectors.iter().filter(|p| !p.pass).map(|p| format!("projector {}", p.event)).collect();
        out.extend(self.edges.iter().filter(|e| !e.pass).map(|e| format!("edge {{{}, {}}} ({:?})", e.a, e.b, e.level)));
        out.extend(
            self.triples
                .iter()
                .filter(|t| !t.pass)
                .map(|t| format!("triple {{{}, {}, {}}}", t.events[0], t.events[1], t.events[2])),
        );
        out
    }

    pub fn into_result(self) -> Result<Self> {
        if self.all_pass {
            Ok(self)
        } else {
            Err(Error::ExclusivityViolation(self.failures()))
        }
    }
}

/// Runs every projector, edge (at both description levels) and completeness check.
pub fn verify_exclusivity(events: &[EventProjector], graph: &ExclusivityGraph) -> Result<ExclusivityReport> {
    let lattice = events.first().map(|e| e.full_form.lattice()).unwrap_or_default();
    let mut projectors = Vec::new();
    for e in events {
        let h = e.full_form.hermiticity_defect();
        let i = e.full_form.idempotency_defect();
        let d = e.dominance_defect();
        projectors.push(ProjectorCheck {
            event: e.label,
            hermiticity_defect: h,
            idempotency_defect: i,
            dominance_defect: d,
            rank: e.rank(),
            pass: h < TOL && i < TOL && d < TOL,
        });
    }

    let mut edges = Vec::new();
    for &(a, b) in &graph.edges {
        let (ea, eb) = (find(events, a)?, find(events, b)?);
        for level in [CheckLevel::Full, CheckLevel::Effective] {
            let (pa, pb) = match level {
                CheckLevel::Full => (&ea.full_form, &eb.full_form),
                CheckLevel::Effective => (&ea.effective_form, &eb.effective_form),
            };
            let product_norm = pa.matmul(pb)?.max_norm();
            edges.push(EdgeCheck { a, b, level, product_norm, pass: product_norm < TOL });
        }
    }

    let mut triples = Vec::new();
    for t in &graph.completeness_triples {
        let mut sum = DenseOperator::zeros(lattice);
        for label in t {
            sum = sum.plus(&find(events, *label)?.full_form)?;
        }
        let deviation = sum.minus(&DenseOperator::identity(lattice))?.max_norm();
        triples.push(TripleCheck { events: *t, deviation, pass: deviation < TOL });
    }

    let all_pass = projectors.iter().all(|p| p.pass) && edges.iter().all(|e| e.pass) && triples.iter().all(|t| t.pass);
    Ok(ExclusivityReport { projectors, edges, triples, all_pass })
}

/// `‖Π_a Π_b‖∞` on the full forms, for probing non-edges.
pub fn product_norm(events: &[EventProjector], a: EventLabel, b: EventLabel) -> Result<f64> {
    Ok(find(events, a)?.full_form.matmul(&find(events, b)?.full_form)?.max_norm())
}

/// YES/NO value per event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HVAssignment(pub BTreeMap<EventLabel, bool>);

impl HVAssignment {
    pub fn get(&self, e: EventLabel) -> Option<bool> {
        self.0.get(&e).copied()
    }

    pub fn yes_count(&self) -> usize {
        self.0.values().filter(|v| **v).count()
    }

    pub fn respects_edges(&self, g: &ExclusivityGraph) -> bool {
        g.edges.iter().all(|(a, b)| !(self.get(*a) == Some(true) && self.get(*b) == Some(true)))
    }

    /// Exactly one YES per completeness triple.
    pub fn respects_triples(&self, g: &ExclusivityGraph) -> bool {
        g.completeness_triples.iter().all(|t| t.iter().filter(|e| self.get(**e) == Some(true)).count() == 1)
    }

    pub fn is_admissible(&self, g: &ExclusivityGraph) -> bool {
        self.respects_edges(g) && self.respects_triples(g)
    }
}

/// Renders a truth value as `YES`/`NO`.
#[derive(Debug, Clone, Copy)]
pub struct YesNo(pub bool);

impl Serialize for YesNo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(if self.0 { "YES" } else { "NO" })
    }
}

impl HVAssignment {
    pub fn to_yes_no(&self) -> BTreeMap<EventLabel, YesNo> {
        self.0.iter().map(|(k, v)| (*k, YesNo(*v))).collect()
    }
}

/// Scans all `2^|V|` assignments in lexicographic order (NO before YES, vertices in
/// graph order) and keeps the admissible ones that agree with `forced`.
pub fn enumerate_nchv(graph: &ExclusivityGraph, forced: &BTreeMap<EventLabel, bool>) -> Vec<HVAssignment> {
    let n = graph.vertices.len();
    let mut out = Vec::new();
    for code in 0u64..(1u64 << n) {
        let map: BTreeMap<EventLabel, bool> =
            graph.vertices.iter().enumerate().map(|(i, v)| (*v, code >> (n - 1 - i) & 1 == 1)).collect();
        let a = HVAssignment(map);
        if forced.iter().all(|(k, v)| a.get(*k) == Some(*v)) && a.is_admissible(graph) {
            out.push(a);
        }
    }
    out
}

/// Largest number of YES values in any admissible assignment, or `None` if there is none.
pub fn max_yes(graph: &ExclusivityGraph) -> Option<usize> {
    enumerate_nchv(graph, &BTreeMap::new()).iter().map(HVAssignment::yes_count).max()
}

/// `⟨s|Π|s⟩` on the full form.
pub fn event_probability(e: &EventProjector, s: &StateVector) -> Result<f64> {
    s.require_normalized()?;
    let v = e.full_form.expectation(s)?;
    debug_assert!(v.im.abs() < TOL);
    Ok(v.re.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KcbsValue {
    pub terms: BTreeMap<EventLabel, f64>,
    pub value: f64,
    pub classical_bound: f64,
    pub exceeds_bound: bool,
}

/// `p(pre_bar0) + p(0) + p(5) + p(pre_bar5) + p(post)` against the classical bound 2.
pub fn kcbs_value(events: &[EventProjector], s: &StateVector) -> Result<KcbsValue> {
    let cycle = ExclusivityGraph::kcbs_cycle();
    let mut terms = BTreeMap::new();
    for v in &cycle.vertices {
        terms.insert(*v, event_probability(find(events, *v)?, s)?);
    }
    let value = terms.values().sum::<f64>();
    let classical_bound = 2.0;
    Ok(KcbsValue { terms, value, classical_bound, exceeds_bound: value > classical_bound + TOL })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub margin: f64,
}

/// `p(post) ≤ p(post_bar0) + p(post_bar5)`.
pub fn final_inequality(p_post: f64, p_post_bar0: f64, p_post_bar5: f64) -> Result<FinalInequality> {
    for p in [p_post, p_post_bar0, p_post_bar5] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange { value: p });
        }
    }
    let lhs = p_post;
    let rhs = p_post_bar0 + p_post_bar5;
    Ok(FinalInequality { lhs, rhs, violated: lhs > rhs, margin: lhs - rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::CoinState;
    use proptest::prelude::*;

    fn events() -> Vec<EventProjector> {
        build_events(Lattice::default()).unwrap()
    }

    fn ev(es: &[EventProjector], l: EventLabel) -> &EventProjector {
        find(es, l).unwrap()
    }

    fn pre0() -> StateVector {
        CanonicalState::Pre0.vector(Lattice::default()).unwrap()
    }

    #[test]
    fn projector_ranks_and_supports() {
        let es = events();
        let l = Lattice::default();
        assert!((ev(&es, EventLabel::Zero).rank() - 2.0).abs() < TOL);
        assert!((ev(&es, EventLabel::Pre).rank() - 1.0).abs() < TOL);
        let five = &ev(&es, EventLabel::Five).full_form;
        assert!((five.trace().re - 2.0).abs() < TOL);
        // U|5,+⟩ = |4,−⟩ and U|5,−⟩ = |6,+⟩
        let diag: Vec<_> = l.basis().filter(|b| five.entry(*b, *b).norm() > 0.5).collect();
        assert_eq!(
            diag.iter().map(|b| (b.position, b.coin)).collect::<Vec<_>>(),
            vec![(4, CoinState::Minus), (6, CoinState::Plus)]
        );
    }

    #[test]
    fn every_full_form_is_a_projector() {
        for e in events() {
            assert!(e.full_form.is_projector(), "{}", e.label);
            assert!(e.effective_form.is_projector(), "{}", e.label);
            assert!(e.dominance_defect() < TOL, "{}", e.label);
        }
    }

    #[test]
    fn clifton_graph_checks_pass() {
        let es = events();
        let g = ExclusivityGraph::clifton();
        assert_eq!(g.edges.len(), 11);
        let report = verify_exclusivity(&es, &g).unwrap();
        assert!(report.all_pass, "{:?}", report.failures());
        assert_eq!(report.edges.len(), 22);
        assert_eq!(report.triples.len(), 2);
        assert!(report.into_result().is_ok());
    }

    #[test]
    fn pre_and_post_are_not_exclusive() {
        let es = events();
        // ‖|pre⟩⟨pre|post⟩⟨post|‖∞ = (1/5)·max|pre_i|·max|post_j| = (1/5)(1/5)
        let n = product_norm(&es, EventLabel::Pre, EventLabel::Post).unwrap();
        assert!((n - 1.0 / 25.0).abs() < TOL);
        let overlap = pre0().inner(&CanonicalState::Post2.vector(Lattice::default()).unwrap()).unwrap();
        assert!((overlap.norm() - 0.2).abs() < TOL);
    }

    #[test]
    fn a_bogus_edge_is_reported() {
        let es = events();
        let mut g = ExclusivityGraph::clifton();
        g.edges.push((EventLabel::Pre, EventLabel::Post));
        let report = verify_exclusivity(&es, &g).unwrap();
        assert!(!report.all_pass);
        let err = report.into_result().unwrap_err();
        match err {
            Error::ExclusivityViolation(list) => assert!(list.iter().any(|s| s.contains("{pre, post}"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forcing_pre_and_post_is_contradictory() {
        let g = ExclusivityGraph::clifton();
        let forced = BTreeMap::from([(EventLabel::Pre, true), (EventLabel::Post, true)]);
        assert!(enumerate_nchv(&g, &forced).is_empty());
        let only_pre = enumerate_nchv(&g, &BTreeMap::from([(EventLabel::Pre, true)]));
        assert!(!only_pre.is_empty());
        assert!(only_pre.iter().all(|a| a.get(EventLabel::Post) == Some(false)));
        assert!(!enumerate_nchv(&g, &BTreeMap::new()).is_empty());
    }

    #[test]
    fn kcbs_cycle_admits_at_most_two_yes() {
        let c = ExclusivityGraph::kcbs_cycle();
        assert_eq!(c.vertices.len(), 5);
        assert_eq!(c.edges.len(), 5);
        assert_eq!(max_yes(&c), Some(2));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let g = ExclusivityGraph::clifton();
        let all = enumerate_nchv(&g, &BTreeMap::new());
        let keys: Vec<Vec<bool>> =
            all.iter().map(|a| g.vertices.iter().map(|v| a.get(*v).unwrap()).collect()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn event_probabilities_on_pre0() {
        let es = events();
        let s = pre0();
        let p = |l| event_probability(ev(&es, l), &s).unwrap();
        assert!((p(EventLabel::Zero) - 0.2).abs() < TOL);
        assert!((p(EventLabel::PreBar0) - 0.8).abs() < TOL);
        assert!((p(EventLabel::Post) - 0.04).abs() < TOL);
        assert!((p(EventLabel::Five) - 0.2).abs() < TOL);
        assert!((p(EventLabel::PreBar5) - 0.8).abs() < TOL);
    }

    #[test]
    fn kcbs_of_pre0_and_of_a_basis_state() {
        let es = events();
        let k = kcbs_value(&es, &pre0()).unwrap();
        assert!((k.value - 51.0 / 25.0).abs() < TOL);
        assert!(k.exceeds_bound);
        let p_post = event_probability(ev(&es, EventLabel::Post), &pre0()).unwrap();
        assert!((k.value - 2.0 - p_post).abs() < TOL);
        // |0,−⟩: p(0)=1, p(pre_bar5)=|⟨c+|+⟩|²=1/2 at x=1, p(post)=1/5
        let b = StateVector::basis(Lattice::default(), 0, CoinState::Minus).unwrap();
        let k = kcbs_value(&es, &b).unwrap();
        assert!((k.value - 1.7).abs() < TOL);
        assert!(!k.exceeds_bound);
    }

    #[test]
    fn final_inequality_cases() {
        let f = final_inequality(0.04, 0.0, 0.0).unwrap();
        assert!(f.violated);
        assert!((f.margin - 0.04).abs() < TOL);
        let f = final_inequality(0.0498, 0.0056, 0.0075).unwrap();
        assert!(f.violated);
        assert!((f.rhs - 0.0131).abs() < TOL);
        assert!((f.margin - 0.0367).abs() < TOL);
        let f = final_inequality(0.2, 0.1, 0.1).unwrap();
        assert!(!f.violated);
        assert_eq!(f.margin, 0.0);
        assert!(matches!(final_inequality(1.2, 0.0, 0.0), Err(Error::ProbabilityOutOfRange { .. })));
    }

    #[test]
    fn small_lattice_is_rejected() {
        assert!(build_events(Lattice::new(0, 5).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn completeness_triples_are_probability_identities(
            v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
        ) {
            let l = Lattice::default();
            let coeffs: Vec<Amplitude> = v.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
            let s = StateVector::from_dense(l, &coeffs).unwrap();
            prop_assume!(s.norm_sqr() > 1e-6);
            let s = s.normalized().unwrap();
            let es = events();
            for t in ExclusivityGraph::clifton().completeness_triples {
                let total: f64 = t.iter().map(|e| event_probability(ev(&es, *e), &s).unwrap()).sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }
}
