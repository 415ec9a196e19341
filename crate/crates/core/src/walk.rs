//! One step of the walk, `U = S (1 ⊗ C)`: toss the coin, then shift
//! `|x,+⟩ → |x+1,+⟩`, `|x,-⟩ → |x-1,-⟩`. With `C = NOT` this gives
//! `|x,±⟩ → |x∓1,∓⟩` and `U² = 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{Amplitude, BasisState, CoinState, DenseOperator, Lattice, StateVector, ONE, TOL, ZERO};

/// 2×2 coin matrix indexed `[out][in]` in the (MINUS, PLUS) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coin([[Amplitude; 2]; 2]);

impl Coin {
    pub fn not() -> Self {
        Coin([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Coin([[h, h], [h, -h]])
    }

    pub fn new(matrix: [[Amplitude; 2]; 2]) -> Result<Self> {
        let m = matrix;
        let mut deviation: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let dot: Amplitude = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let target = if i == j { ONE } else { ZERO };
                deviation = deviation.max((dot - target).norm());
            }
        }
        if deviation >= TOL {
            return Err(Error::NonUnitaryCoin { deviation });
        }
        Ok(Coin(matrix))
    }

    pub fn matrix(&self) -> [[Amplitude; 2]; 2] {
        self.0
    }

    fn adjoint(&self) -> Coin {
        let m = self.0;
        Coin([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }
}

fn shift(coin: CoinState) -> i64 {
    match coin {
        CoinState::Plus => 1,
        CoinState::Minus => -1,
    }
}

/// Sparse single-step evolution with its cached dense matrix.
///
/// The dense `U` closes the lattice periodically so that it is exactly unitary;
/// the sparse [`step`](Self::step) refuses to move amplitude across a boundary.
#[derive(Debug, Clone)]
pub struct StepOperator {
    lattice: Lattice,
    coin: Coin,
    dense: DenseOperator,
    dense_adjoint: DenseOperator,
}

impl StepOperator {
    pub fn new(lattice: Lattice) -> Self {
        Self::with_coin(lattice, Coin::not())
    }

    pub fn with_coin(lattice: Lattice, coin: Coin) -> Self {
        let sites = lattice.sites() as i64;
        let wrap = |x: i64| lattice.lo + (x - lattice.lo).rem_euclid(sites);
        let m = coin.matrix();
        let dense = DenseOperator::from_fn(lattice, |row, col| {
            // ⟨row| S (1⊗C) |col⟩: coin toss keeps the position, shift follows the new coin
            if row.position == wrap(col.position + shift(row.coin)) {
                m[row.coin.index()][col.coin.index()]
            } else {
                ZERO
            }
        });
        let dense_adjoint = dense.adjoint();
        Self { lattice, coin, dense, dense_adjoint }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn coin(&self) -> Coin {
        self.coin
    }

    pub fn dense(&self) -> &DenseOperator {
        &self.dense
    }

    pub fn dense_adjoint(&self) -> &DenseOperator {
        &self.dense_adjoint
    }

    fn check(&self, s: &StateVector) -> Result<()> {
        if s.lattice() != self.lattice {
            return Err(Error::LatticeMismatch { left: self.lattice, right: s.lattice() });
        }
        Ok(())
    }

    fn moved(&self, from: i64, to: i64) -> Result<i64> {
        if self.lattice.contains(to) {
            Ok(to)
        } else {
            Err(Error::LatticeOverflow { position: from, lattice: self.lattice })
        }
    }

    pub fn step(&self, s: &StateVector) -> Result<StateVector> {
        self.check(s)?;
        let m = self.coin.matrix();
        let mut out = StateVector::empty(self.lattice);
        for (b, a) in s.terms() {
            for c in CoinState::ALL {
                let amp = m[c.index()][b.coin.index()] * a;
                if amp == ZERO {
                    continue;
                }
                let x = self.moved(b.position, b.position + shift(c))?;
                out.add_term(BasisState::new(x, c), amp)?;
            }
        }
        Ok(out)
    }

    /// `U† = (1 ⊗ C†) S†`.
    pub fn step_adjoint(&self, s: &StateVector) -> Result<StateVector> {
        self.check(s)?;
        let m = self.coin.adjoint().matrix();
        let mut out = StateVector::empty(self.lattice);
        for (b, a) in s.terms() {
            let x = self.moved(b.position, b.position - shift(b.coin))?;
            for c in CoinState::ALL {
                let amp = m[c.index()][b.coin.index()] * a;
                if amp != ZERO {
                    out.add_term(BasisState::new(x, c), amp)?;
                }
            }
        }
        Ok(out)
    }

    pub fn evolve(&self, s: &StateVector, steps: u32) -> Result<StateVector> {
        let mut cur = s.clone();
        for _ in 0..steps {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }

    pub fn evolve_back(&self, s: &StateVector, steps: u32) -> Result<StateVector> {
        let mut cur = s.clone();
        for _ in 0..steps {
            cur = self.step_adjoint(&cur)?;
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::TOL;
    use proptest::prelude::*;

    fn r(x: f64) -> Amplitude {
        Complex64::new(x, 0.0)
    }

    fn basis(x: i64, c: CoinState) -> StateVector {
        StateVector::basis(Lattice::default(), x, c).unwrap()
    }

    fn pre0() -> StateVector {
        let k = r(1.0 / 5f64.sqrt());
        use CoinState::*;
        StateVector::from_terms(
            Lattice::default(),
            [(0, Minus, k), (2, Minus, k), (2, Plus, k), (4, Minus, k), (4, Plus, k)],
        )
        .unwrap()
    }

    fn pre1() -> StateVector {
        let k = r(1.0 / 5f64.sqrt());
        use CoinState::*;
        StateVector::from_terms(
            Lattice::default(),
            [(1, Minus, k), (1, Plus, k), (3, Minus, k), (3, Plus, k), (5, Plus, k)],
        )
        .unwrap()
    }

    #[test]
    fn single_step_rule() {
        let u = StepOperator::new(Lattice::default());
        assert_eq!(u.step(&basis(0, CoinState::Minus)).unwrap(), basis(1, CoinState::Plus));
        assert_eq!(u.step(&basis(3, CoinState::Plus)).unwrap(), basis(2, CoinState::Minus));
    }

    #[test]
    fn pre_states_oscillate() {
        let u = StepOperator::new(Lattice::default());
        assert!(u.step(&pre0()).unwrap().approx_eq(&pre1(), TOL));
        assert!(u.evolve(&pre0(), 2).unwrap().approx_eq(&pre0(), TOL));
        assert!(u.step_adjoint(&pre1()).unwrap().approx_eq(&pre0(), TOL));
    }

    #[test]
    fn evolve_zero_and_two() {
        let u = StepOperator::new(Lattice::default());
        assert_eq!(u.evolve(&pre1(), 0).unwrap(), pre1());
        assert_eq!(u.evolve(&basis(3, CoinState::Plus), 2).unwrap(), basis(3, CoinState::Plus));
    }

    #[test]
    fn adjoint_inverts_step() {
        let u = StepOperator::new(Lattice::default());
        assert_eq!(u.step_adjoint(&basis(1, CoinState::Plus)).unwrap(), basis(0, CoinState::Minus));
        let x = basis(2, CoinState::Minus);
        assert_eq!(u.evolve_back(&x, 2).unwrap(), x);
    }

    #[test]
    fn boundary_overflow_is_an_error() {
        let u = StepOperator::new(Lattice::default());
        // |6,-⟩ → |7,+⟩ and |-1,+⟩ → |-2,-⟩ leave [-1, 6]
        assert!(matches!(u.step(&basis(6, CoinState::Minus)), Err(Error::LatticeOverflow { .. })));
        assert!(matches!(u.step(&basis(-1, CoinState::Plus)), Err(Error::LatticeOverflow { .. })));
        assert!(matches!(u.step_adjoint(&basis(6, CoinState::Minus)), Err(Error::LatticeOverflow { .. })));
    }

    #[test]
    fn dense_u_is_unitary_involution() {
        let u = StepOperator::new(Lattice::default());
        assert!(u.dense().unitarity_defect() < TOL);
        let sq = u.dense().matmul(u.dense()).unwrap();
        assert!(sq.minus(&DenseOperator::identity(Lattice::default())).unwrap().max_norm() < TOL);
    }

    #[test]
    fn hadamard_coin_is_unitary_and_steps_match_dense() {
        let u = StepOperator::with_coin(Lattice::default(), Coin::hadamard());
        assert!(u.dense().is_unitary());
        let s = pre0();
        assert!(u.step(&s).unwrap().approx_eq(&u.dense().apply(&s).unwrap(), TOL));
        let back = u.step_adjoint(&u.step(&s).unwrap()).unwrap();
        assert!(back.approx_eq(&s, TOL));
    }

    #[test]
    fn non_unitary_coin_is_rejected() {
        assert!(matches!(Coin::new([[ONE, ONE], [ZERO, ONE]]), Err(Error::NonUnitaryCoin { .. })));
    }

    proptest! {
        #[test]
        fn unitary_preserves_norm(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)) {
            let l = Lattice::default();
            let coeffs: Vec<Amplitude> = v.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
            let s = StateVector::from_dense(l, &coeffs).unwrap();
            let u = StepOperator::new(l);
            let out = u.dense().apply(&s).unwrap();
            prop_assert!((out.norm_sqr() - s.norm_sqr()).abs() < TOL);
        }
    }
}
