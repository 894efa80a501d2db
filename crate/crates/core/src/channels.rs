//! Concrete maps diagonal in the Weyl basis: the dynamical map `Lambda_t`,
//! the generator `L_t`, propagators `V_{t,s}` and the auxiliary map `Phi_t`
//! of the split `L_t = Phi_t + 2 gamma_0 id`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};
use crate::linalg::{hermitian_eigenvalues, hermiticity_defect};
use crate::rates::{trapezoid_cumulative, Spectrum, TimeGrid, IMAG_TOL, SINGULARITY_FLOOR};
use crate::weyl::{Hadamard, WeylBasis};

const STATE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// A qudit state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() < 2 {
            return Err(NmdError::InvalidState(format!(
                "expected square matrix of size >= 2, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = hermiticity_defect(&mat);
        if herm > STATE_TOL {
            return Err(NmdError::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = mat.trace();
        if (tr - 1.0).norm() > STATE_TOL {
            return Err(NmdError::InvalidState(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&mat)[0];
        if min < -PSD_TOL {
            return Err(NmdError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { mat })
    }

    /// `|psi><psi|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(NmdError::InvalidState("zero vector".into()));
        }
        let d = psi.len();
        let mut mat = DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        // exact hermiticity
        for i in 0..d {
            mat[(i, i)].im = 0.0;
        }
        Self::new(mat)
    }

    /// `|k><k|`.
    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(NmdError::InvalidState(format!("basis index {k} >= d = {d}")));
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); d];
        psi[k] = Complex64::new(1.0, 0.0);
        Self::pure(&psi)
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0))
    }

    /// Haar-random pure state.
    pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let psi: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::pure(&psi).expect("gaussian vector is nonzero")
    }

    /// Mixed state from the Ginibre ensemble: `G G^dag / Tr`.
    pub fn random_mixed<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let mut m = &g * g.adjoint();
        let tr = m.trace().re;
        m /= Complex64::new(tr, 0.0);
        let m = crate::linalg::hermitian_part(&m);
        Self::new(m).expect("Ginibre product is a state")
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Channel,
    Propagator,
    Phi,
}

/// `X -> sum_a a_a U_a X U_a^dag` with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalMap {
    d: usize,
    coefficients: Vec<f64>,
    kind: MapKind,
}

impl DiagonalMap {
    pub fn new(d: usize, coefficients: Vec<f64>, kind: MapKind) -> Result<Self> {
        if d < 2 {
            return Err(NmdError::InvalidDimension(d));
        }
        if coefficients.len() != d * d {
            return Err(NmdError::DimensionMismatch {
                expected: d * d,
                found: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(NmdError::InvalidParameter("map coefficients must be finite".into()));
        }
        if matches!(kind, MapKind::Channel | MapKind::Propagator) {
            let s: f64 = coefficients.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(NmdError::InvalidParameter(format!(
                    "trace-preserving map needs coefficients summing to 1, got {s}"
                )));
            }
        }
        Ok(Self {
            d,
            coefficients,
            kind,
        })
    }

    pub fn channel(d: usize, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(d, coefficients, MapKind::Channel)
    }

    pub fn identity(d: usize) -> Result<Self> {
        let mut a = vec![0.0; d * d];
        a[0] = 1.0;
        Self::channel(d, a)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    /// Eigenvalues on the Weyl operators: `(H a)_b`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        Hadamard::new(self.d)
            .expect("dimension validated")
            .apply_real(&self.coefficients)
    }

    /// Apply to an arbitrary `d x d` matrix.
    pub fn apply(&self, basis: &WeylBasis, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        check_operand(basis, self.d, x)?;
        let mut out = DMatrix::zeros(self.d, self.d);
        for (u, &a) in basis.operators().iter().zip(&self.coefficients) {
            if a != 0.0 {
                out += (u * x * u.adjoint()) * Complex64::new(a, 0.0);
            }
        }
        Ok(out)
    }

    /// Matrix of the map on the Weyl basis: `P[b][a] = Tr[U_b^dag m(U_a)] / d`,
    /// computed by acting on every `U_a`.
    pub fn process_matrix(&self, basis: &WeylBasis) -> Result<DMatrix<Complex64>> {
        let n = self.d * self.d;
        let mut p = DMatrix::zeros(n, n);
        for a in 0..n {
            let img = self.apply(basis, basis.operator(a))?;
            for (b, z) in basis.coordinates(&img).into_iter().enumerate() {
                p[(b, a)] = z;
            }
        }
        Ok(p)
    }
}

fn check_operand(basis: &WeylBasis, d: usize, x: &DMatrix<Complex64>) -> Result<()> {
    if basis.dim() != d {
        return Err(NmdError::DimensionMismatch {
            expected: d,
            found: basis.dim(),
        });
    }
    if x.nrows() != d || x.ncols() != d {
        return Err(NmdError::DimensionMismatch {
            expected: d,
            found: x.nrows(),
        });
    }
    Ok(())
}

/// `sum_a a_a U_a rho U_a^dag`.
pub fn apply_map(
    basis: &WeylBasis,
    map: &DiagonalMap,
    rho: &DensityMatrix,
) -> Result<DMatrix<Complex64>> {
    map.apply(basis, rho.matrix())
}

/// `L(X) = sum_{k>=1} gamma_k (U_k X U_k^dag - X)`.
pub fn apply_generator(
    basis: &WeylBasis,
    gammas: &[f64],
    x: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let d = basis.dim();
    if gammas.len() != d * d - 1 {
        return Err(NmdError::DimensionMismatch {
            expected: d * d - 1,
            found: gammas.len(),
        });
    }
    check_operand(basis, d, x)?;
    let mut out = DMatrix::zeros(d, d);
    for (k, &g) in gammas.iter().enumerate() {
        if g != 0.0 {
            let u = basis.operator(k + 1);
            out += (u * x * u.adjoint() - x) * Complex64::new(g, 0.0);
        }
    }
    Ok(out)
}

/// The channel `Lambda_t` at grid point `i` of a spectrum, via `p = H lambda / d^2`.
pub fn channel_at(s: &Spectrum, i: usize) -> Result<DiagonalMap> {
    let d = s.dim();
    let coefficients = real_weights(d, s.row(i), s.grid().points()[i])?;
    DiagonalMap::channel(d, coefficients)
}

fn real_weights(d: usize, lambdas: &[Complex64], t: f64) -> Result<Vec<f64>> {
    let h = Hadamard::new(d)?;
    let scale = 1.0 / (d * d) as f64;
    h.apply(lambdas)
        .into_iter()
        .enumerate()
        .map(|(a, z)| {
            let z = z * scale;
            if z.im.abs() > IMAG_TOL {
                Err(NmdError::NonHermitianSpectrum {
                    time: t,
                    index: a,
                    residue: z.im.abs(),
                })
            } else {
                Ok(z.re)
            }
        })
        .collect()
}

/// The propagator `V_{t,s}` between two grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSlice {
    pub d: usize,
    pub s: f64,
    pub t: f64,
    /// Kraus-type weights `q_a(t,s) = (H (lambda(t) / lambda(s)))_a / d^2`.
    pub coefficients: Vec<f64>,
    /// `v(t;s) = exp(2 int_s^t gamma_0)`, obtained from the spectrum through
    /// `int_0^t gamma_0 = sum_{a>=1} ln |lambda_a(t)| / d^2`.
    pub scaling: f64,
}

impl PropagatorSlice {
    pub fn as_map(&self) -> Result<DiagonalMap> {
        DiagonalMap::new(self.d, self.coefficients.clone(), MapKind::Propagator)
    }

    /// Completely positive iff every weight is nonnegative (to 1e-10).
    pub fn is_cp(&self) -> bool {
        self.coefficients.iter().all(|&q| q >= -1e-10)
    }
}

/// `V_{t,s}` with `Lambda_t = V_{t,s} Lambda_s`, for grid indices `s_idx <= t_idx`.
pub fn propagator(spec: &Spectrum, s_idx: usize, t_idx: usize) -> Result<PropagatorSlice> {
    let n = spec.grid().len();
    if s_idx >= n || t_idx >= n {
        return Err(NmdError::InvalidParameter(format!(
            "grid index out of range ({s_idx}, {t_idx}) for {n} points"
        )));
    }
    if t_idx < s_idx {
        return Err(NmdError::InvalidParameter(format!(
            "propagator needs t >= s, got indices s = {s_idx}, t = {t_idx}"
        )));
    }
    let d = spec.dim();
    let pts = spec.grid().points();
    let (ls, lt) = (spec.row(s_idx), spec.row(t_idx));
    if let Some((a, z)) = ls
        .iter()
        .enumerate()
        .find(|(_, z)| z.norm() < SINGULARITY_FLOOR)
    {
        return Err(NmdError::SpectrumSingularity {
            time: pts[s_idx],
            index: a,
            modulus: z.norm(),
        });
    }
    let ratio: Vec<Complex64> = lt.iter().zip(ls).map(|(a, b)| a / b).collect();
    let coefficients = real_weights(d, &ratio, pts[t_idx])?;
    let log_vol: f64 = ratio[1..].iter().map(|z| z.norm().ln()).sum();
    let scaling = (2.0 * log_vol / (d * d) as f64).exp();
    Ok(PropagatorSlice {
        d,
        s: pts[s_idx],
        t: pts[t_idx],
        coefficients,
        scaling,
    })
}

/// `v(t;s) = exp(2 int_s^t gamma_0)` by the trapezoid rule on the grid.
pub fn scaling_factor(grid: &TimeGrid, gamma0: &[f64], s_idx: usize, t_idx: usize) -> Result<f64> {
    if gamma0.len() != grid.len() {
        return Err(NmdError::DimensionMismatch {
            expected: grid.len(),
            found: gamma0.len(),
        });
    }
    if t_idx < s_idx || t_idx >= grid.len() {
        return Err(NmdError::InvalidParameter(format!(
            "need s <= t within the grid, got indices {s_idx}, {t_idx}"
        )));
    }
    let cum = trapezoid_cumulative(grid, gamma0);
    Ok((2.0 * (cum[t_idx] - cum[s_idx])).exp())
}

/// Coefficients of `Phi_t(X) = sum_k gamma_k U_k X U_k^dag - gamma_0 X`
/// split into nonnegative (`b`) and strictly negative (`c`, stored as
/// magnitudes) parts. Each entry keeps its flat Weyl index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiDecomposition {
    pub d: usize,
    pub coefficients: Vec<f64>,
    pub positive: Vec<(usize, f64)>,
    pub negative: Vec<(usize, f64)>,
}

impl PhiDecomposition {
    /// `M`: number of nonnegative coefficients.
    pub fn m(&self) -> usize {
        self.positive.len()
    }

    /// `N`: number of strictly negative coefficients.
    pub fn n(&self) -> usize {
        self.negative.len()
    }

    pub fn b(&self) -> Vec<f64> {
        self.positive.iter().map(|p| p.1).collect()
    }

    pub fn c(&self) -> Vec<f64> {
        self.negative.iter().map(|p| p.1).collect()
    }

    pub fn as_map(&self) -> DiagonalMap {
        DiagonalMap::new(self.d, self.coefficients.clone(), MapKind::Phi)
            .expect("validated coefficients")
    }
}

pub fn phi_decomposition(d: usize, gammas: &[f64]) -> Result<PhiDecomposition> {
    if d < 2 {
        return Err(NmdError::InvalidDimension(d));
    }
    if gammas.len() != d * d - 1 {
        return Err(NmdError::DimensionMismatch {
            expected: d * d - 1,
            found: gammas.len(),
        });
    }
    let mut coefficients = Vec::with_capacity(d * d);
    coefficients.push(gammas.iter().sum::<f64>());
    coefficients.extend_from_slice(gammas);
    let (mut positive, mut negative) = (Vec::new(), Vec::new());
    for (a, &v) in coefficients.iter().enumerate() {
        // zeros belong to the nonnegative side
        if v < 0.0 {
            negative.push((a, -v));
        } else {
            positive.push((a, v));
        }
    }
    Ok(PhiDecomposition {
        d,
        coefficients,
        positive,
        negative,
    })
}
