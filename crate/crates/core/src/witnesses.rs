//! Independent numerical oracles.
//!
//! Everything here works from dense matrices (Choi matrices, states pushed
//! through the map) rather than from the coefficient algebra used by
//! [`crate::divisibility`], so that the two can be checked against each other.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channels::{DensityMatrix, DiagonalMap};
use crate::error::{NmdError, Result};
use crate::linalg::{hermitian_eigenvalues, min_eigenpair, trace_norm, von_neumann_entropy};
use crate::rates::{finite_difference, Spectrum};
use crate::weyl::WeylBasis;

/// Coefficient / eigenvalue slack for CP decisions.
pub const CP_TOL: f64 = 1e-10;
/// A Schmidt-rank-k vector with `<psi|C|psi>` below `-FALSIFY_TOL` disproves k-positivity.
pub const FALSIFY_TOL: f64 = 1e-9;
/// Maximum alternating sweeps per start.
pub const FALSIFIER_SWEEPS: usize = 50;
/// Sweeps stop once the objective improves by less than this.
pub const FALSIFIER_CONVERGENCE: f64 = 1e-10;

/// `C = sum_ij |i><j| (x) m(|i><j|)`, a `d^2 x d^2` Hermitian matrix with
/// trace `d * sum_a a_a` (`d` for a channel). Row index `i * d + a` pairs the
/// input index `i` with the output index `a`.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    d: usize,
    mat: DMatrix<Complex64>,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    /// `<psi|C|psi> / <psi|psi>`.
    pub fn expectation(&self, psi: &DVector<Complex64>) -> f64 {
        let num = psi.dotc(&(&self.mat * psi)).re;
        num / psi.norm_squared()
    }
}

pub fn choi(basis: &WeylBasis, map: &DiagonalMap) -> Result<ChoiMatrix> {
    let d = map.dim();
    if basis.dim() != d {
        return Err(NmdError::DimensionMismatch {
            expected: d,
            found: basis.dim(),
        });
    }
    let n = d * d;
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = Complex64::new(1.0, 0.0);
            let img = map.apply(basis, &e)?;
            for a in 0..d {
                for b in 0..d {
                    mat[(i * d + a, j * d + b)] = img[(a, b)];
                }
            }
        }
    }
    Ok(ChoiMatrix { d, mat })
}

/// Both routes to complete positivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpCheck {
    pub min_choi_eigenvalue: f64,
    pub min_coefficient: f64,
    pub by_choi: bool,
    pub by_coefficients: bool,
}

impl CpCheck {
    pub fn agree(&self) -> bool {
        self.by_choi == self.by_coefficients
    }

    pub fn is_cp(&self) -> bool {
        self.by_choi
    }
}

/// Choi-eigenvalue test alongside the coefficient-sign test.
///
/// The Choi eigenvalues of a Weyl-diagonal map are `d a_a`, so the Choi
/// threshold is scaled by `d` to compare like with like.
pub fn cp_check(basis: &WeylBasis, map: &DiagonalMap) -> Result<CpCheck> {
    let c = choi(basis, map)?;
    let min_choi_eigenvalue = c.eigenvalues()[0];
    let min_coefficient = map
        .coefficients()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(CpCheck {
        min_choi_eigenvalue,
        min_coefficient,
        by_choi: min_choi_eigenvalue >= -CP_TOL * map.dim() as f64,
        by_coefficients: min_coefficient >= -CP_TOL,
    })
}

/// A Schmidt-rank-`k` vector on which the Choi form is negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifierWitness {
    pub k: usize,
    pub value: f64,
    /// Unit vector, index `i * d + a`.
    pub vector: Vec<Complex64>,
    /// Which start found it (`None` for the deterministic Weyl start).
    pub trial: Option<usize>,
}

fn random_factor(d: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, k, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// `Q` of a thin QR: `k` orthonormal columns spanning the columns of `y`.
fn orthonormal_columns(y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    y.clone().qr().q()
}

/// Schmidt-rank-k vector `sum_r x_r (x) y_r` from factor matrices (columns `x_r`, `y_r`).
fn assemble(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> DVector<Complex64> {
    let d = x.nrows();
    let m = x * y.transpose();
    DVector::from_fn(d * d, |idx, _| m[(idx / d, idx % d)])
}

/// The Choi form of a diagonal map in factored form: `C = sum_a d a_a v_a v_a^dag`
/// with `v_a = vec(U_a) / sqrt(d)`, so reduced matrices never touch the full `d^2 x d^2` Choi matrix.
struct ChoiForm<'a> {
    coefficients: &'a [f64],
    operators: &'a [DMatrix<Complex64>],
}

impl ChoiForm<'_> {
    /// `sum_a a_a w_a w_a^dag` for the vectors `w_a` produced by `project`.
    fn reduced(&self, dk: usize, project: impl Fn(&DMatrix<Complex64>) -> DVector<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(dk, dk);
        for (u, &a) in self.operators.iter().zip(self.coefficients) {
            if a != 0.0 {
                let w = project(u);
                out += (&w * w.adjoint()) * Complex64::new(a, 0.0);
            }
        }
        out
    }

    /// Minimize over the `x` factors with orthonormal `y` fixed; entry `(i, r)` of `x`
    /// sits at `r * d + i` of the reduced eigenvector.
    fn optimize_left(&self, y: &DMatrix<Complex64>) -> (f64, DMatrix<Complex64>) {
        let (d, k) = (y.nrows(), y.ncols());
        let yh = y.adjoint();
        let reduced = self.reduced(d * k, |u| {
            let m = &yh * u;
            DVector::from_fn(d * k, |idx, _| m[(idx / d, idx % d)])
        });
        let (val, v) = min_eigenpair(&reduced);
        (val, DMatrix::from_fn(d, k, |i, r| v[r * d + i]))
    }

    /// Minimize over the `y` factors with orthonormal `x` fixed.
    fn optimize_right(&self, x: &DMatrix<Complex64>) -> (f64, DMatrix<Complex64>) {
        let (d, k) = (x.nrows(), x.ncols());
        let xc = x.map(|z| z.conj());
        let reduced = self.reduced(d * k, |u| {
            let m = u * &xc;
            DVector::from_fn(d * k, |idx, _| m[(idx % d, idx / d)])
        });
        let (val, v) = min_eigenpair(&reduced);
        (val, DMatrix::from_fn(d, k, |j, r| v[r * d + j]))
    }
}

/// Alternating minimization from a starting right factor. Returns the best
/// value and its vector.
fn descend(form: &ChoiForm, y0: DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let mut y = orthonormal_columns(&y0);
    let mut best = f64::INFINITY;
    let mut best_vec = None;
    for _ in 0..FALSIFIER_SWEEPS {
        let (_, x) = form.optimize_left(&y);
        let xq = orthonormal_columns(&x);
        let (val, ynew) = form.optimize_right(&xq);
        let improvement = best - val;
        if val < best {
            best = val;
            best_vec = Some((xq.clone(), ynew.clone()));
        }
        if best < -FALSIFY_TOL || improvement < FALSIFIER_CONVERGENCE {
            break;
        }
        y = orthonormal_columns(&ynew);
    }
    let (x, y) = best_vec.expect("at least one sweep");
    let mut v = assemble(&x, &y);
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    (best, v)
}

/// Search for a Schmidt-rank-`k` vector `psi` with `<psi|C|psi> < -1e-9`.
///
/// Starts: at `k = d` the vectorized Weyl operator of the most negative
/// coefficient is tried first (it is an exact Choi eigenvector); then
/// `trials` seeded random starts, each refined by alternating minimization
/// over the left and right Schmidt factors. The first violation in start
/// order is returned. A returned witness proves the map is not k-positive;
/// `None` proves nothing.
pub fn k_positivity_falsifier(
    basis: &WeylBasis,
    map: &DiagonalMap,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Option<FalsifierWitness>> {
    let d = map.dim();
    if k == 0 || k > d {
        return Err(NmdError::InvalidK(k as i64));
    }
    let c = choi(basis, map)?;

    if k == d {
        let (alpha, &amin) = map
            .coefficients()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if amin < 0.0 {
            let u = basis.operator(alpha);
            let scale = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
            // (I (x) U)|Omega>: component (i, a) is U[a][i]
            let v = DVector::from_fn(d * d, |idx, _| u[(idx % d, idx / d)] * scale);
            let value = c.expectation(&v);
            if value < -FALSIFY_TOL {
                return Ok(Some(FalsifierWitness {
                    k,
                    value,
                    vector: v.iter().copied().collect(),
                    trial: None,
                }));
            }
        }
    }

    let form = ChoiForm {
        coefficients: map.coefficients(),
        operators: basis.operators(),
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let y0 = random_factor(d, k, &mut rng);
        let (value, v) = descend(&form, y0);
        // report the value recomputed on the assembled vector
        let value = if value < -FALSIFY_TOL { c.expectation(&v) } else { value };
        if value < -FALSIFY_TOL {
            return Ok(Some(FalsifierWitness {
                k,
                value,
                vector: v.iter().copied().collect(),
                trial: Some(trial),
            }));
        }
    }
    Ok(None)
}

/// `|| Lambda_t(x) ||_tr`-style helper: push a matrix through the map at grid point `i`.
fn evolve(basis: &WeylBasis, s: &Spectrum, i: usize, coords: &[Complex64]) -> DMatrix<Complex64> {
    let scaled: Vec<Complex64> = coords
        .iter()
        .zip(s.row(i))
        .map(|(x, l)| x * l)
        .collect();
    basis.from_coordinates(&scaled)
}

fn check_state(basis: &WeylBasis, s: &Spectrum, rho: &DensityMatrix) -> Result<()> {
    if basis.dim() != s.dim() || rho.dim() != s.dim() {
        return Err(NmdError::DimensionMismatch {
            expected: s.dim(),
            found: if basis.dim() != s.dim() {
                basis.dim()
            } else {
                rho.dim()
            },
        });
    }
    Ok(())
}

/// `|| Lambda_t(rho1 - rho2) ||_tr` at every grid point.
pub fn trace_distance_series(
    basis: &WeylBasis,
    s: &Spectrum,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<Vec<f64>> {
    check_state(basis, s, rho1)?;
    check_state(basis, s, rho2)?;
    let diff = rho1.matrix() - rho2.matrix();
    let coords = basis.coordinates(&diff);
    Ok((0..s.grid().len())
        .map(|i| trace_norm(&evolve(basis, s, i, &coords)))
        .collect())
}

/// Time derivative of the trace distance by second-order finite differences.
/// Non-positive everywhere for P-divisible random unitary evolutions.
pub fn blp_derivative(
    basis: &WeylBasis,
    s: &Spectrum,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<Vec<f64>> {
    let series = trace_distance_series(basis, s, rho1, rho2)?;
    Ok(finite_difference(s.grid(), &series))
}

/// `S(Lambda_t(rho))` at every grid point.
pub fn entropy_series(basis: &WeylBasis, s: &Spectrum, rho: &DensityMatrix) -> Result<Vec<f64>> {
    check_state(basis, s, rho)?;
    let coords = basis.coordinates(rho.matrix());
    Ok((0..s.grid().len())
        .map(|i| von_neumann_entropy(&evolve(basis, s, i, &coords)))
        .collect())
}

/// Time derivative of the entropy; non-negative everywhere for P-divisible evolutions.
pub fn entropy_derivative(basis: &WeylBasis, s: &Spectrum, rho: &DensityMatrix) -> Result<Vec<f64>> {
    let series = entropy_series(basis, s, rho)?;
    Ok(finite_difference(s.grid(), &series))
}

/// Volume increments at or below this are rounding noise.
pub const VOLUME_TOL: f64 = 1e-13;

/// Geometric non-Markovianity from the volume proxy `V(t) = prod_{a>=1} |lambda_a(t)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeasure {
    /// Accumulated growth of `V` relative to `V(0) = 1`.
    pub value: f64,
    pub volume: Vec<f64>,
    /// Grid intervals `[t_i, t_{i+1}]` on which `V` grows.
    pub growth_intervals: Vec<[f64; 2]>,
}

/// `V(t)` and the integral of `dV/dt` over the times where it is positive,
/// taken over the piecewise-linear interpolant of `V` (sum of positive increments).
pub fn volume_measure(s: &Spectrum) -> VolumeMeasure {
    let volume: Vec<f64> = s
        .values()
        .iter()
        .map(|row| row[1..].iter().map(|z| z.norm()).product())
        .collect();
    let v0 = volume[0];
    let pts = s.grid().points();
    let mut value = 0.0;
    let mut growth_intervals = Vec::new();
    for i in 0..volume.len() - 1 {
        let dv = volume[i + 1] - volume[i];
        if dv > VOLUME_TOL {
            value += dv;
            growth_intervals.push([pts[i], pts[i + 1]]);
        }
    }
    VolumeMeasure {
        value: value / v0,
        volume,
        growth_intervals,
    }
}

/// A recorded violation of a monotonicity condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub kind: ViolationKind,
    /// Pair or state number.
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Trace distance increased.
    Blp,
    /// Entropy decreased.
    Entropy,
    /// Volume of accessible states increased.
    Volume,
}

/// BLP derivatives above this are recorded as violations.
pub const BLP_TOL: f64 = 1e-6;
/// Entropy derivatives below `-ENTROPY_TOL` are recorded as violations.
pub const ENTROPY_TOL: f64 = 1e-6;

/// Time series of all witnesses for a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessTrace {
    pub times: Vec<f64>,
    pub distances: Vec<Vec<f64>>,
    pub blp_derivatives: Vec<Vec<f64>>,
    pub entropies: Vec<Vec<f64>>,
    pub entropy_derivatives: Vec<Vec<f64>>,
    pub volume: VolumeMeasure,
    /// Sorted by time, then kind, then index.
    pub violations: Vec<Violation>,
}

impl WitnessTrace {
    pub fn max_blp_derivative(&self) -> f64 {
        self.blp_derivatives
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_entropy_derivative(&self) -> f64 {
        self.entropy_derivatives
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn witness_trace(
    basis: &WeylBasis,
    s: &Spectrum,
    pairs: &[(DensityMatrix, DensityMatrix)],
    states: &[DensityMatrix],
) -> Result<WitnessTrace> {
    let times = s.grid().points().to_vec();
    let mut distances = Vec::with_capacity(pairs.len());
    let mut blp_derivatives = Vec::with_capacity(pairs.len());
    for (r1, r2) in pairs {
        let series = trace_distance_series(basis, s, r1, r2)?;
        blp_derivatives.push(finite_difference(s.grid(), &series));
        distances.push(series);
    }
    let mut entropies = Vec::with_capacity(states.len());
    let mut entropy_derivatives = Vec::with_capacity(states.len());
    for rho in states {
        let series = entropy_series(basis, s, rho)?;
        entropy_derivatives.push(finite_difference(s.grid(), &series));
        entropies.push(series);
    }
    let volume = volume_measure(s);

    let mut violations = Vec::new();
    for (p, der) in blp_derivatives.iter().enumerate() {
        for (i, &v) in der.iter().enumerate() {
            if v > BLP_TOL {
                violations.push(Violation {
                    time: times[i],
                    kind: ViolationKind::Blp,
                    index: p,
                    magnitude: v,
                });
            }
        }
    }
    for (p, der) in entropy_derivatives.iter().enumerate() {
        for (i, &v) in der.iter().enumerate() {
            if v < -ENTROPY_TOL {
                violations.push(Violation {
                    time: times[i],
                    kind: ViolationKind::Entropy,
                    index: p,
                    magnitude: -v,
                });
            }
        }
    }
    for (i, w) in volume.volume.windows(2).enumerate() {
        if w[1] - w[0] > VOLUME_TOL {
            violations.push(Violation {
                time: times[i + 1],
                kind: ViolationKind::Volume,
                index: 0,
                magnitude: w[1] - w[0],
            });
        }
    }
    violations.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then((a.kind as u8).cmp(&(b.kind as u8)))
            .then(a.index.cmp(&b.index))
    });
    Ok(WitnessTrace {
        times,
        distances,
        blp_derivatives,
        entropies,
        entropy_derivatives,
        volume,
        violations,
    })
}

/// Seeded random state pairs (Haar pure) and single states (Ginibre mixed).
pub fn random_states(
    d: usize,
    pairs: usize,
    states: usize,
    seed: u64,
) -> (Vec<(DensityMatrix, DensityMatrix)>, Vec<DensityMatrix>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..pairs)
        .map(|_| {
            (
                DensityMatrix::random_pure(d, &mut rng),
                DensityMatrix::random_pure(d, &mut rng),
            )
        })
        .collect();
    let s = (0..states)
        .map(|_| DensityMatrix::random_mixed(d, &mut rng))
        .collect();
    (p, s)
}
