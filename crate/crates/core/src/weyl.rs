//! Weyl (generalized spin) operators on `C^d` and the character matrix that
//! diagonalizes every map of the form `X -> sum_a p_a U_a X U_a^dag`.
//!
//! Convention: `U_(m,n) = sum_j w^(m j) |j><j + n|` with `w = exp(2 pi i / d)`,
//! flat index `a = m d + n`. For d = 3 this reproduces the usual shift/clock
//! table entry for entry (`U_1` is the cyclic shift, `U_3 = diag(1, w, w^2)`).
//!
//! With this convention
//!
//! ```text
//! U_(m,n) U_(r,s)   = w^(n r)        U_(m+r, n+s)
//! U_(m,n)^dag       = w^(m n)        U_(-m, -n)
//! U_b U_a U_b^dag   = w^(m_a n_b - n_a m_b) U_a
//! ```
//!
//! and the character matrix is `H[a][b] = w^(m_a n_b - n_a m_b)`, so that a
//! random unitary channel with weights `p` acts on `U_a` as multiplication by
//! `(H p)_a`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{NmdError, Result};

/// Tolerance used when comparing phases.
pub const PHASE_TOL: f64 = 1e-12;

/// Index of a Weyl operator: phase power `m`, shift `n`, dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeylIndex {
    m: usize,
    n: usize,
    d: usize,
}

impl WeylIndex {
    pub fn new(m: usize, n: usize, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(NmdError::InvalidDimension(d));
        }
        if m >= d || n >= d {
            return Err(NmdError::InvalidIndex { m, n, d });
        }
        Ok(Self { m, n, d })
    }

    pub fn from_flat(alpha: usize, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(NmdError::InvalidDimension(d));
        }
        if alpha >= d * d {
            return Err(NmdError::InvalidIndex {
                m: alpha / d,
                n: alpha % d,
                d,
            });
        }
        Ok(Self {
            m: alpha / d,
            n: alpha % d,
            d,
        })
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::new(0, 0, d)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn flat(&self) -> usize {
        self.m * self.d + self.n
    }

    pub fn is_identity(&self) -> bool {
        self.m == 0 && self.n == 0
    }

    /// Index of the inverse element `(-m, -n)`.
    pub fn negated(&self) -> Self {
        let d = self.d;
        Self {
            m: (d - self.m) % d,
            n: (d - self.n) % d,
            d,
        }
    }

    fn check_same_dim(&self, other: &WeylIndex) -> Result<()> {
        if self.d != other.d {
            return Err(NmdError::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        Ok(())
    }
}

/// `w^p` for `w = exp(2 pi i / d)`, with the exponent reduced mod `d` first.
pub fn omega_pow(d: usize, p: i64) -> Complex64 {
    let r = p.rem_euclid(d as i64);
    if r == 0 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / d as f64)
}

/// Symplectic form `m_a n_b - n_a m_b (mod d)`: exponent of the commutation
/// phase `U_b U_a U_b^dag = w^(.) U_a`.
pub fn symplectic(a: &WeylIndex, b: &WeylIndex) -> i64 {
    let d = a.d as i64;
    ((a.m as i64) * (b.n as i64) - (a.n as i64) * (b.m as i64)).rem_euclid(d)
}

/// `U_a U_b = phase * U_c`.
pub fn compose(a: &WeylIndex, b: &WeylIndex) -> Result<(Complex64, WeylIndex)> {
    a.check_same_dim(b)?;
    let d = a.d;
    let c = WeylIndex {
        m: (a.m + b.m) % d,
        n: (a.n + b.n) % d,
        d,
    };
    Ok((omega_pow(d, (a.n * b.m) as i64), c))
}

/// `U_a^dag = phase * U_c`.
pub fn adjoint(a: &WeylIndex) -> (Complex64, WeylIndex) {
    (omega_pow(a.d, (a.m * a.n) as i64), a.negated())
}

/// Phase `phi` with `U_r U_a U_r^dag = phi * U_a`.
pub fn conjugation_phase(r: &WeylIndex, a: &WeylIndex) -> Result<Complex64> {
    r.check_same_dim(a)?;
    Ok(omega_pow(a.d, symplectic(a, r)))
}

/// Dense `d x d` matrix of `U_a`.
pub fn weyl_matrix(a: &WeylIndex) -> DMatrix<Complex64> {
    let d = a.d;
    let mut u = DMatrix::zeros(d, d);
    for j in 0..d {
        u[(j, (j + a.n) % d)] = omega_pow(d, (a.m * j) as i64);
    }
    u
}

/// The `d^2 x d^2` character matrix `H[a][b] = w^(m_a n_b - n_a m_b)`.
///
/// Hermitian, `H H = d^2 I`, first row and column all ones.
#[derive(Debug, Clone)]
pub struct Hadamard {
    d: usize,
    exponents: Vec<u32>,
    roots: Vec<Complex64>,
}

impl Hadamard {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(NmdError::InvalidDimension(d));
        }
        let n = d * d;
        let mut exponents = vec![0u32; n * n];
        for a in 0..n {
            let ia = WeylIndex::from_flat(a, d)?;
            for b in 0..n {
                let ib = WeylIndex::from_flat(b, d)?;
                exponents[a * n + b] = symplectic(&ia, &ib) as u32;
            }
        }
        let roots = (0..d as i64).map(|p| omega_pow(d, p)).collect();
        Ok(Self { d, exponents, roots })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of rows (`d^2`).
    #[inline]
    pub fn size(&self) -> usize {
        self.d * self.d
    }

    #[inline]
    pub fn exponent(&self, a: usize, b: usize) -> u32 {
        self.exponents[a * self.size() + b]
    }

    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> Complex64 {
        self.roots[self.exponent(a, b) as usize]
    }

    /// `H x` for a real vector.
    pub fn apply_real(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.size();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|a| {
                x.iter()
                    .enumerate()
                    .map(|(b, &v)| self.entry(a, b) * v)
                    .sum()
            })
            .collect()
    }

    /// `H x` for a complex vector.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|a| {
                x.iter()
                    .enumerate()
                    .map(|(b, &v)| self.entry(a, b) * v)
                    .sum()
            })
            .collect()
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |a, b| self.entry(a, b))
    }
}

/// All `d^2` Weyl operators together with the character matrix.
#[derive(Debug, Clone)]
pub struct WeylBasis {
    d: usize,
    omega: Complex64,
    operators: Vec<DMatrix<Complex64>>,
    hadamard: Hadamard,
}

impl WeylBasis {
    pub fn new(d: usize) -> Result<Self> {
        let hadamard = Hadamard::new(d)?;
        let operators = (0..d * d)
            .map(|a| WeylIndex::from_flat(a, d).map(|i| weyl_matrix(&i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            d,
            omega: omega_pow(d, 1),
            operators,
            hadamard,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of operators (`d^2`).
    #[inline]
    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    pub fn operator(&self, alpha: usize) -> &DMatrix<Complex64> {
        &self.operators[alpha]
    }

    pub fn operators(&self) -> &[DMatrix<Complex64>] {
        &self.operators
    }

    pub fn hadamard(&self) -> &Hadamard {
        &self.hadamard
    }

    pub fn index(&self, alpha: usize) -> Result<WeylIndex> {
        WeylIndex::from_flat(alpha, self.d)
    }

    /// Coordinates of `x` in the Weyl basis: `x = sum_a c_a U_a`, `c_a = Tr[U_a^dag x] / d`.
    pub fn coordinates(&self, x: &DMatrix<Complex64>) -> Vec<Complex64> {
        let d = self.d as f64;
        self.operators
            .iter()
            .map(|u| {
                // Tr[U^dag X] = sum_ij conj(U_ij) X_ij
                u.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>() / d
            })
            .collect()
    }

    pub fn from_coordinates(&self, c: &[Complex64]) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.d, self.d);
        for (u, &ca) in self.operators.iter().zip(c) {
            if ca != Complex64::new(0.0, 0.0) {
                out += u * ca;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn dagger(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a.adjoint()
    }

    /// The d = 3 table, written out by hand.
    fn explicit_d3() -> Vec<DMatrix<Complex64>> {
        let w = omega_pow(3, 1);
        let w2 = omega_pow(3, 2);
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let m = |v: [Complex64; 9]| DMatrix::from_row_slice(3, 3, &v);
        vec![
            m([l, o, o, o, l, o, o, o, l]),
            m([o, l, o, o, o, l, l, o, o]),
            m([o, o, l, l, o, o, o, l, o]),
            m([l, o, o, o, w, o, o, o, w2]),
            m([o, l, o, o, o, w, w2, o, o]),
            m([o, o, l, w, o, o, o, w2, o]),
            m([l, o, o, o, w2, o, o, o, w]),
            m([o, l, o, o, o, w2, w, o, o]),
            m([o, o, l, w2, o, o, o, w, o]),
        ]
    }

    #[test]
    fn rejects_small_dimension() {
        assert_eq!(WeylBasis::new(1).unwrap_err(), NmdError::InvalidDimension(1));
        assert!(WeylBasis::new(0).is_err());
        assert!(WeylIndex::new(3, 0, 3).is_err());
    }

    #[test]
    fn qutrit_operators_match_table() {
        let basis = WeylBasis::new(3).unwrap();
        for (alpha, expected) in explicit_d3().iter().enumerate() {
            assert!(
                max_diff(basis.operator(alpha), expected) < 1e-15,
                "U_{alpha} differs"
            );
        }
        // U_4: 1 at (0,1), w at (1,2), w^2 at (2,0)
        let u4 = basis.operator(4);
        assert_eq!(u4[(0, 1)], c(1.0, 0.0));
        assert!((u4[(1, 2)] - basis.omega()).norm() < 1e-15);
        assert!((u4[(2, 0)] - basis.omega() * basis.omega()).norm() < 1e-15);
    }

    #[test]
    fn qubit_shift_is_pauli_x() {
        let basis = WeylBasis::new(2).unwrap();
        let x = basis.operator(1);
        assert_eq!(x[(0, 1)], c(1.0, 0.0));
        assert_eq!(x[(1, 0)], c(1.0, 0.0));
        assert_eq!(x[(0, 0)], c(0.0, 0.0));
        assert_eq!(x[(1, 1)], c(0.0, 0.0));
        assert!(max_diff(&(x * dagger(x)), &DMatrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn identity_is_first() {
        for d in 2..6 {
            let basis = WeylBasis::new(d).unwrap();
            assert_eq!(basis.operator(0), &DMatrix::<Complex64>::identity(d, d));
            assert!(WeylIndex::from_flat(0, d).unwrap().is_identity());
            assert!(!WeylIndex::from_flat(1, d).unwrap().is_identity());
        }
    }

    #[test]
    fn flat_index_bijection() {
        for d in 2..7 {
            for alpha in 0..d * d {
                let i = WeylIndex::from_flat(alpha, d).unwrap();
                assert_eq!(i.flat(), alpha);
                assert_eq!(WeylIndex::new(i.m(), i.n(), d).unwrap(), i);
            }
            assert!(WeylIndex::from_flat(d * d, d).is_err());
        }
    }

    #[test]
    fn compose_examples() {
        let a = WeylIndex::new(1, 0, 3).unwrap();
        let b = WeylIndex::new(0, 1, 3).unwrap();
        let (ph, cidx) = compose(&a, &b).unwrap();
        assert!((ph - c(1.0, 0.0)).norm() < PHASE_TOL);
        assert_eq!(cidx.flat(), 4);
        let basis = WeylBasis::new(3).unwrap();
        let prod = basis.operator(3) * basis.operator(1);
        assert_eq!(prod, *basis.operator(4));

        let y = WeylIndex::new(1, 1, 2).unwrap();
        let (ph, cidx) = compose(&y, &y).unwrap();
        assert!(cidx.is_identity());
        assert!((ph.re.abs() - 1.0).abs() < PHASE_TOL && ph.im.abs() < PHASE_TOL);

        let other = WeylIndex::new(0, 0, 2).unwrap();
        assert!(compose(&a, &other).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let (ph, cidx) = adjoint(&WeylIndex::new(1, 0, 3).unwrap());
        assert!((ph - 1.0).norm() < PHASE_TOL);
        assert_eq!(cidx.flat(), 6);
        let (ph, cidx) = adjoint(&WeylIndex::new(1, 1, 2).unwrap());
        assert!((ph + 1.0).norm() < PHASE_TOL);
        assert_eq!(cidx.flat(), 3);
        let (ph, cidx) = adjoint(&WeylIndex::identity(4).unwrap());
        assert!((ph - 1.0).norm() < PHASE_TOL);
        assert!(cidx.is_identity());
    }

    #[test]
    fn conjugation_examples() {
        let shift = WeylIndex::new(0, 1, 3).unwrap();
        let clock = WeylIndex::new(1, 0, 3).unwrap();
        let ph = conjugation_phase(&shift, &clock).unwrap();
        assert!((ph - 1.0).norm() > 0.5);
        assert!((ph.powu(3) - 1.0).norm() < PHASE_TOL);

        // fixed points of conjugation by U_1 are exactly the m = 0 indices
        for alpha in 0..9 {
            let a = WeylIndex::from_flat(alpha, 3).unwrap();
            let ph = conjugation_phase(&shift, &a).unwrap();
            assert_eq!((ph - 1.0).norm() < PHASE_TOL, a.m() == 0, "alpha {alpha}");
        }

        // [U_1, U_2] = 0
        let u2 = WeylIndex::from_flat(2, 3).unwrap();
        assert!((conjugation_phase(&shift, &u2).unwrap() - 1.0).norm() < PHASE_TOL);
    }

    /// Every algebraic rule checked against dense matrix arithmetic.
    #[test]
    fn relations_agree_with_matrices() {
        for d in 2..=5 {
            let basis = WeylBasis::new(d).unwrap();
            for a in 0..d * d {
                let ia = basis.index(a).unwrap();
                let ua = basis.operator(a);
                let (ph, ci) = adjoint(&ia);
                assert!(max_diff(&dagger(ua), &(basis.operator(ci.flat()) * ph)) < 1e-12);
                for b in 0..d * d {
                    let ib = basis.index(b).unwrap();
                    let ub = basis.operator(b);
                    let (ph, ci) = compose(&ia, &ib).unwrap();
                    assert!(
                        max_diff(&(ua * ub), &(basis.operator(ci.flat()) * ph)) < 1e-12,
                        "compose d={d} a={a} b={b}"
                    );
                    let ph = conjugation_phase(&ib, &ia).unwrap();
                    assert!(max_diff(&(ub * ua * dagger(ub)), &(ua * ph)) < 1e-12);
                    assert!((ph.norm() - 1.0).abs() < 1e-12);
                    let tr: Complex64 = (ua * dagger(ub)).trace();
                    let expected = if a == b { d as f64 } else { 0.0 };
                    assert!((tr - expected).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hadamard_properties() {
        for d in 2..=5 {
            let h = Hadamard::new(d).unwrap();
            let n = d * d;
            let m = h.to_matrix();
            assert!(max_diff(&m, &m.adjoint()) < 1e-12);
            let sq = &m * &m;
            let target = DMatrix::<Complex64>::identity(n, n) * c((n) as f64, 0.0);
            assert!(max_diff(&sq, &target) < 1e-10);
            for a in 0..n {
                assert_eq!(h.entry(0, a), c(1.0, 0.0));
                assert_eq!(h.entry(a, 0), c(1.0, 0.0));
                let row: Complex64 = (0..n).map(|b| h.entry(a, b)).sum();
                let expected = if a == 0 { n as f64 } else { 0.0 };
                assert!((row - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn coordinates_roundtrip() {
        let basis = WeylBasis::new(3).unwrap();
        let x = DMatrix::from_fn(3, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let back = basis.from_coordinates(&basis.coordinates(&x));
        assert!(max_diff(&x, &back) < 1e-12);
    }
}
