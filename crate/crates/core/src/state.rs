//! Complex linear algebra over the truncated position ⊗ coin space.
//!
//! States are sparse maps from [`BasisState`] to amplitude. Operators are dense
//! matrices in the fixed basis ordering: position-major, coin-minor, with
//! [`CoinState::Minus`] before [`CoinState::Plus`]. The dense form is the oracle
//! every sparse operation is checked against.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Amplitude = Complex64;

/// Tolerance for exact-algebra identities.
pub const TOL: f64 = 1e-12;
/// Amplitudes with modulus below this are dropped from sparse states.
pub const PRUNE: f64 = 1e-15;

pub const ZERO: Amplitude = Complex64::new(0.0, 0.0);
pub const ONE: Amplitude = Complex64::new(1.0, 0.0);

/// Two-level coin. `Minus` is encoded as vertical polarization, `Plus` as horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoinState {
    Minus,
    Plus,
}

impl CoinState {
    pub const ALL: [CoinState; 2] = [CoinState::Minus, CoinState::Plus];

    pub fn index(self) -> usize {
        match self {
            CoinState::Minus => 0,
            CoinState::Plus => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            CoinState::Minus
        } else {
            CoinState::Plus
        }
    }

    pub fn flip(self) -> Self {
        match self {
            CoinState::Minus => CoinState::Plus,
            CoinState::Plus => CoinState::Minus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CoinState::Minus => "-",
            CoinState::Plus => "+",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "-" | "minus" | "MINUS" => Ok(CoinState::Minus),
            "+" | "plus" | "PLUS" => Ok(CoinState::Plus),
            other => Err(Error::Parse(format!("unknown coin state `{other}`"))),
        }
    }
}

impl fmt::Display for CoinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisState {
    pub position: i64,
    pub coin: CoinState,
}

impl BasisState {
    pub fn new(position: i64, coin: CoinState) -> Self {
        Self { position, coin }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}⟩", self.position, self.coin)
    }
}

/// Inclusive lattice bounds `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: i64,
    pub hi: i64,
}

impl Default for Lattice {
    fn default() -> Self {
        Self { lo: -1, hi: 6 }
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Lattice {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidLattice { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Parses `lo:hi`.
    pub fn parse(s: &str) -> Result<Self> {
        let (lo, hi) =
            s.split_once(':').ok_or_else(|| Error::Parse(format!("lattice `{s}` is not of the form lo:hi")))?;
        let lo = lo.trim().parse().map_err(|_| Error::Parse(format!("bad lower bound in `{s}`")))?;
        let hi = hi.trim().parse().map_err(|_| Error::Parse(format!("bad upper bound in `{s}`")))?;
        Self::new(lo, hi)
    }

    pub fn sites(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn dim(&self) -> usize {
        2 * self.sites()
    }

    pub fn contains(&self, x: i64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        self.lo <= lo && hi <= self.hi
    }

    pub fn positions(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn index_of(&self, b: BasisState) -> usize {
        debug_assert!(self.contains(b.position));
        ((b.position - self.lo) as usize) * 2 + b.coin.index()
    }

    pub fn basis_at(&self, index: usize) -> BasisState {
        BasisState::new(self.lo + (index / 2) as i64, CoinState::from_index(index % 2))
    }

    pub fn basis(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dim()).map(move |i| self.basis_at(i))
    }

    fn check_same(&self, other: &Lattice) -> Result<()> {
        if self != other {
            return Err(Error::LatticeMismatch { left: *self, right: *other });
        }
        Ok(())
    }
}

/// Sparse pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    lattice: Lattice,
    terms: BTreeMap<BasisState, Amplitude>,
}

impl StateVector {
    pub fn empty(lattice: Lattice) -> Self {
        Self { lattice, terms: BTreeMap::new() }
    }

    pub fn basis(lattice: Lattice, position: i64, coin: CoinState) -> Result<Self> {
        let mut s = Self::empty(lattice);
        s.add_term(BasisState::new(position, coin), ONE)?;
        Ok(s)
    }

    pub fn from_terms<I>(lattice: Lattice, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, CoinState, Amplitude)>,
    {
        let mut s = Self::empty(lattice);
        for (x, c, a) in terms {
            s.add_term(BasisState::new(x, c), a)?;
        }
        Ok(s)
    }

    /// Adds `amp` to the coefficient of `basis`, pruning the result if it vanishes.
    pub fn add_term(&mut self, basis: BasisState, amp: Amplitude) -> Result<()> {
        if !self.lattice.contains(basis.position) {
            return Err(Error::OutOfLattice { position: basis.position, lattice: self.lattice });
        }
        if !(amp.re.is_finite() && amp.im.is_finite()) {
            return Err(Error::NonFinite { position: basis.position });
        }
        let entry = self.terms.entry(basis).or_insert(ZERO);
        *entry += amp;
        if entry.norm() < PRUNE {
            self.terms.remove(&basis);
        }
        Ok(())
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn terms(&self) -> impl Iterator<Item = (BasisState, Amplitude)> + '_ {
        self.terms.iter().map(|(b, a)| (*b, *a))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, position: i64, coin: CoinState) -> Amplitude {
        self.terms.get(&BasisState::new(position, coin)).copied().unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < TOL
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized { norm_sqr: self.norm_sqr() })
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n < PRUNE {
            return Err(Error::NotNormalized { norm_sqr: n });
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, k: Amplitude) -> Self {
        let mut out = Self::empty(self.lattice);
        for (b, a) in self.terms() {
            // in-lattice and finite by construction
            let _ = out.add_term(b, a * k);
        }
        out
    }

    /// Positions carrying nonzero amplitude, ascending.
    pub fn support(&self) -> Vec<i64> {
        let mut xs: Vec<i64> = self.terms.keys().map(|b| b.position).collect();
        xs.dedup();
        xs
    }

    /// Keeps only the terms for which `keep` holds.
    pub fn filtered(&self, mut keep: impl FnMut(BasisState) -> bool) -> Self {
        Self {
            lattice: self.lattice,
            terms: self.terms.iter().filter(|(b, _)| keep(**b)).map(|(b, a)| (*b, *a)).collect(),
        }
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Amplitude> {
        inner_product(self, other)
    }

    pub fn to_dense(&self) -> Vec<Amplitude> {
        let mut v = vec![ZERO; self.lattice.dim()];
        for (b, a) in self.terms() {
            v[self.lattice.index_of(b)] = a;
        }
        v
    }

    pub fn from_dense(lattice: Lattice, coeffs: &[Amplitude]) -> Result<Self> {
        if coeffs.len() != lattice.dim() {
            return Err(Error::DimensionMismatch { operator: coeffs.len(), state: lattice.dim() });
        }
        let mut s = Self::empty(lattice);
        for (i, a) in coeffs.iter().enumerate() {
            s.add_term(lattice.basis_at(i), *a)?;
        }
        Ok(s)
    }

    /// Largest coefficient-wise modulus of `self - other`.
    pub fn max_deviation(&self, other: &StateVector) -> Result<f64> {
        self.lattice.check_same(&other.lattice)?;
        let d = self.clone() - other.clone();
        Ok(d?.terms.values().map(|a| a.norm()).fold(0.0, f64::max))
    }

    pub fn approx_eq(&self, other: &StateVector, tol: f64) -> bool {
        matches!(self.max_deviation(other), Ok(d) if d < tol)
    }

    fn combine(mut self, rhs: StateVector, sign: f64) -> Result<StateVector> {
        self.lattice.check_same(&rhs.lattice)?;
        for (b, a) in rhs.terms {
            self.add_term(b, a * sign)?;
        }
        Ok(self)
    }
}

impl Add for StateVector {
    type Output = Result<StateVector>;

    fn add(self, rhs: StateVector) -> Result<StateVector> {
        self.combine(rhs, 1.0)
    }
}

impl Sub for StateVector {
    type Output = Result<StateVector>;

    fn sub(self, rhs: StateVector) -> Result<StateVector> {
        self.combine(rhs, -1.0)
    }
}

pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Amplitude> {
    a.lattice.check_same(&b.lattice)?;
    // iterate the sparser side
    let (small, large, conj_small) = if a.len() <= b.len() { (a, b, true) } else { (b, a, false) };
    let mut acc = ZERO;
    for (basis, amp) in small.terms() {
        if let Some(other) = large.terms.get(&basis) {
            acc += if conj_small { amp.conj() * other } else { other.conj() * amp };
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermJson {
    x: i64,
    coin: String,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateJson {
    bounds: [i64; 2],
    terms: Vec<TermJson>,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson {
            bounds: [self.lattice.lo, self.lattice.hi],
            terms: self
                .terms()
                .map(|(b, a)| TermJson { x: b.position, coin: b.coin.symbol().to_string(), re: a.re, im: a.im })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = StateJson::deserialize(deserializer)?;
        let lattice = Lattice::new(raw.bounds[0], raw.bounds[1]).map_err(D::Error::custom)?;
        let mut s = StateVector::empty(lattice);
        for t in raw.terms {
            let coin = CoinState::parse(&t.coin).map_err(D::Error::custom)?;
            s.add_term(BasisState::new(t.x, coin), Complex64::new(t.re, t.im)).map_err(D::Error::custom)?;
        }
        Ok(s)
    }
}

/// Dense square operator on the lattice space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    lattice: Lattice,
    dim: usize,
    entries: Vec<Amplitude>,
}

impl DenseOperator {
    pub fn zeros(lattice: Lattice) -> Self {
        let dim = lattice.dim();
        Self { lattice, dim, entries: vec![ZERO; dim * dim] }
    }

    pub fn identity(lattice: Lattice) -> Self {
        Self::from_fn(lattice, |r, c| if r == c { ONE } else { ZERO })
    }

    pub fn from_fn(lattice: Lattice, mut f: impl FnMut(BasisState, BasisState) -> Amplitude) -> Self {
        let mut op = Self::zeros(lattice);
        for r in 0..op.dim {
            for c in 0..op.dim {
                op.entries[r * op.dim + c] = f(lattice.basis_at(r), lattice.basis_at(c));
            }
        }
        op
    }

    /// |ket⟩⟨bra|.
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Result<Self> {
        ket.lattice.check_same(&bra.lattice)?;
        let lattice = ket.lattice;
        let mut op = Self::zeros(lattice);
        for (kb, ka) in ket.terms() {
            for (bb, ba) in bra.terms() {
                let (r, c) = (lattice.index_of(kb), lattice.index_of(bb));
                op.entries[r * op.dim + c] = ka * ba.conj();
            }
        }
        Ok(op)
    }

    /// |v⟩⟨v|.
    pub fn projector_onto(v: &StateVector) -> Result<Self> {
        Self::outer(v, v)
    }

    /// `|x⟩⟨x| ⊗ 1_c`.
    pub fn position_projector(lattice: Lattice, x: i64) -> Result<Self> {
        if !lattice.contains(x) {
            return Err(Error::OutOfLattice { position: x, lattice });
        }
        Ok(Self::from_fn(lattice, |r, c| if r == c && r.position == x { ONE } else { ZERO }))
    }

    /// `position_part ⊗ coin_part` where `position_part` is diagonal.
    pub fn diagonal_position_tensor(
        lattice: Lattice,
        position_weight: impl Fn(i64) -> f64,
        coin: [[Amplitude; 2]; 2],
    ) -> Self {
        Self::from_fn(lattice, |r, c| {
            if r.position == c.position {
                coin[r.coin.index()][c.coin.index()] * position_weight(r.position)
            } else {
                ZERO
            }
        })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Amplitude {
        self.entries[r * self.dim + c]
    }

    pub fn entry(&self, row: BasisState, col: BasisState) -> Amplitude {
        self.get(self.lattice.index_of(row), self.lattice.index_of(col))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.lattice);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.entries[c * self.dim + r] = self.get(r, c).conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &DenseOperator) -> Result<Self> {
        self.lattice.check_same(&rhs.lattice)?;
        let n = self.dim;
        let mut out = Self::zeros(self.lattice);
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.entries[r * n + c] += a * rhs.entries[k * n + c];
                }
            }
        }
        Ok(out)
    }

    pub fn plus(&self, rhs: &DenseOperator) -> Result<Self> {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn minus(&self, rhs: &DenseOperator) -> Result<Self> {
        self.zip(rhs, |a, b| a - b)
    }

    fn zip(&self, rhs: &DenseOperator, f: impl Fn(Amplitude, Amplitude) -> Amplitude) -> Result<Self> {
        self.lattice.check_same(&rhs.lattice)?;
        Ok(Self {
            lattice: self.lattice,
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Amplitude {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.minus(&self.adjoint()).map(|d| d.max_norm()).unwrap_or(f64::INFINITY)
    }

    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.adjoint().matmul(self).expect("same lattice");
        prod.minus(&Self::identity(self.lattice)).expect("same lattice").max_norm()
    }

    pub fn idempotency_defect(&self) -> f64 {
        let sq = self.matmul(self).expect("same lattice");
        sq.minus(self).expect("same lattice").max_norm()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() < TOL
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect() < TOL
    }

    /// Hermitian and idempotent.
    pub fn is_projector(&self) -> bool {
        self.is_hermitian() && self.idempotency_defect() < TOL
    }

    /// Sparse matrix-vector product: only the columns touched by `s` are read.
    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        if self.lattice != s.lattice {
            return Err(Error::DimensionMismatch { operator: self.dim, state: s.lattice.dim() });
        }
        let mut acc = vec![ZERO; self.dim];
        for (b, a) in s.terms() {
            let c = self.lattice.index_of(b);
            for (r, slot) in acc.iter_mut().enumerate() {
                *slot += self.entries[r * self.dim + c] * a;
            }
        }
        StateVector::from_dense(self.lattice, &acc)
    }

    /// Plain dense product on a coefficient vector.
    pub fn apply_dense(&self, v: &[Amplitude]) -> Result<Vec<Amplitude>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { operator: self.dim, state: v.len() });
        }
        Ok((0..self.dim).map(|r| (0..self.dim).map(|c| self.entries[r * self.dim + c] * v[c]).sum()).collect())
    }

    /// ⟨s|A|s⟩.
    pub fn expectation(&self, s: &StateVector) -> Result<Amplitude> {
        s.inner(&self.apply(s)?)
    }
}
