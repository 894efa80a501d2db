//! Time-sampled descriptions of a random unitary evolution and the
//! transforms between them.
//!
//! Three equivalent descriptions are carried on a [`TimeGrid`]:
//!
//! * [`ProbabilityProfile`] `p_a(t)`, the Kraus weights of `Lambda_t`;
//! * [`Spectrum`] `lambda_a(t) = (H p(t))_a`, the eigenvalues of `Lambda_t` on `U_a`;
//! * [`RateProfile`] `gamma_k(t)`, `k >= 1`, the decoherence rates of the
//!   time-local generator, with `gamma_0 = -sum_k gamma_k`.
//!
//! With the character matrix `H` from [`crate::weyl::Hadamard`] the generator
//! acts on `U_a` as `mu_a = (H gamma)_a` (the sum running over all `d^2`
//! components, `gamma_0` included), so `gamma = H mu / d^2` and
//! `lambda_a(t) = exp(sum_{k>=1} (H_ak - 1) Gamma_k(t))` where
//! `Gamma_k = int_0^t gamma_k`. The `-1` is the `gamma_0` column folded in.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};
use crate::weyl::Hadamard;

/// Below this modulus `mu = lambda' / lambda` is treated as undefined.
pub const SINGULARITY_FLOOR: f64 = 1e-12;
/// Largest tolerated imaginary residue when a real quantity is recovered from complex arithmetic.
pub const IMAG_TOL: f64 = 1e-9;
/// Normalization tolerance for probability vectors.
pub const NORM_TOL: f64 = 1e-10;
/// Probabilities above `-LEGIT_TOL` count as nonnegative.
pub const LEGIT_TOL: f64 = 1e-10;

/// Strictly increasing sample times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = NmdError;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        TimeGrid::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.points
    }
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(NmdError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(NmdError::InvalidGrid(format!(
                "first point must be 0, got {}",
                points[0]
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(NmdError::InvalidGrid("non-finite time".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(NmdError::InvalidGrid(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `n_points` equally spaced times on `[0, t_max]`.
    pub fn uniform(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(NmdError::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        if n_points < 2 {
            return Err(NmdError::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        let h = t_max / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points).map(|i| i as f64 * h).collect();
        points[n_points - 1] = t_max;
        Self::new(points)
    }

    /// `0` followed by `n_points - 1` log-spaced times from `t_max * 1e-4` to `t_max`.
    pub fn log_spaced(t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(NmdError::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        if n_points < 3 {
            return Err(NmdError::InvalidGrid(format!(
                "log grid needs at least 3 points, got {n_points}"
            )));
        }
        let decades = 4.0;
        let m = n_points - 1;
        let mut points = Vec::with_capacity(n_points);
        points.push(0.0);
        for i in 0..m {
            let frac = i as f64 / (m - 1) as f64;
            points.push(t_max * 10f64.powf(-decades * (1.0 - frac)));
        }
        points[n_points - 1] = t_max;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Largest spacing between consecutive points.
    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        match self
            .points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.points.len() => self.points.len() - 1,
            Err(i) => {
                if (t - self.points[i - 1]) <= (self.points[i] - t) {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// Second-order finite-difference derivative of samples on a (possibly
/// non-uniform) grid: three-point central stencil inside, three-point
/// one-sided stencils at both ends. Two-point grids fall back to the secant.
pub fn finite_difference(grid: &TimeGrid, f: &[f64]) -> Vec<f64> {
    let x = grid.points();
    let n = x.len();
    assert_eq!(f.len(), n, "sample count must match grid");
    if n == 2 {
        let s = (f[1] - f[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = x[i] - x[i - 1];
        let h2 = x[i + 1] - x[i];
        out[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1]
            + (h2 - h1) / (h1 * h2) * f[i]
            + h1 / (h2 * (h1 + h2)) * f[i + 1];
    }
    let (a, b) = (x[1] - x[0], x[2] - x[1]);
    out[0] = -(2.0 * a + b) / (a * (a + b)) * f[0] + (a + b) / (a * b) * f[1]
        - a / (b * (a + b)) * f[2];
    let (a, b) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    out[n - 1] = b / (a * (a + b)) * f[n - 3] - (a + b) / (a * b) * f[n - 2]
        + (a + 2.0 * b) / (b * (a + b)) * f[n - 1];
    out
}

/// Running composite-trapezoid integral, starting at 0.
pub fn trapezoid_cumulative(grid: &TimeGrid, f: &[f64]) -> Vec<f64> {
    let x = grid.points();
    assert_eq!(f.len(), x.len(), "sample count must match grid");
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
        out.push(acc);
    }
    out
}

// 8-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn check_rows<T>(what: &str, grid: &TimeGrid, values: &[Vec<T>], width: usize) -> Result<()> {
    if values.len() != grid.len() {
        return Err(NmdError::InvalidProfile(format!(
            "{what}: {} rows for {} grid points",
            values.len(),
            grid.len()
        )));
    }
    if let Some((i, row)) = values.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(NmdError::InvalidProfile(format!(
            "{what}: row {i} has {} components, expected {width}",
            row.len()
        )));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(NmdError::InvalidDimension(d));
    }
    Ok(())
}

/// Decoherence rates `gamma_1 .. gamma_{d^2-1}` at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateProfile {
    #[serde(rename = "dimension")]
    d: usize,
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
}

impl RateProfile {
    pub fn new(d: usize, grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(d)?;
        check_rows("rates", &grid, &values, d * d - 1)?;
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NmdError::InvalidProfile("rates must be finite".into()));
        }
        Ok(Self { d, grid, values })
    }

    /// Sample a rate function (returning `d^2 - 1` values) on a grid.
    pub fn from_fn(d: usize, grid: TimeGrid, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(d, grid, values)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// `gamma_0 = -sum_{k>=1} gamma_k` at grid point `i`.
    pub fn gamma0(&self, i: usize) -> f64 {
        -self.values[i].iter().sum::<f64>()
    }

    pub fn gamma0_series(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.gamma0(i)).collect()
    }

    /// Series of component `k` (1-based Weyl index).
    pub fn component(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1 && k < self.d * self.d, "rate index out of range");
        self.values.iter().map(|r| r[k - 1]).collect()
    }
}

/// Eigenvalues `lambda_0 .. lambda_{d^2-1}` of `Lambda_t` at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    #[serde(rename = "dimension")]
    d: usize,
    grid: TimeGrid,
    values: Vec<Vec<Complex64>>,
}

impl Spectrum {
    /// Accepts values with `lambda_0 = 1` everywhere and `lambda(0) = 1`, both to 1e-9.
    pub fn new(d: usize, grid: TimeGrid, values: Vec<Vec<Complex64>>) -> Result<Self> {
        check_dim(d)?;
        check_rows("spectrum", &grid, &values, d * d)?;
        if values
            .iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(NmdError::InvalidProfile("spectrum must be finite".into()));
        }
        if let Some(i) = values.iter().position(|r| (r[0] - 1.0).norm() > 1e-9) {
            return Err(NmdError::InvalidProfile(format!(
                "lambda_0 must be 1 (trace preservation), got {} at t = {}",
                values[i][0],
                grid.points()[i]
            )));
        }
        if let Some(a) = values[0].iter().position(|z| (z - 1.0).norm() > 1e-9) {
            return Err(NmdError::InvalidProfile(format!(
                "lambda_{a}(0) must be 1, got {}",
                values[0][a]
            )));
        }
        Ok(Self { d, grid, values })
    }

    pub fn from_fn(d: usize, grid: TimeGrid, f: impl Fn(f64) -> Vec<Complex64>) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(d, grid, values)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i]
    }

    pub fn component(&self, a: usize) -> Vec<Complex64> {
        self.values.iter().map(|r| r[a]).collect()
    }
}

/// Kraus weights `p_0 .. p_{d^2-1}` at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityProfile {
    #[serde(rename = "dimension")]
    d: usize,
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
}

impl ProbabilityProfile {
    /// Requires every row to sum to 1 and `p_0(0) = 1`, both within 1e-10.
    /// Negative entries are allowed; see [`ProbabilityProfile::is_legitimate`].
    pub fn new(d: usize, grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(d)?;
        check_rows("probabilities", &grid, &values, d * d)?;
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NmdError::InvalidProfile("probabilities must be finite".into()));
        }
        for (i, row) in values.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > NORM_TOL {
                return Err(NmdError::InvalidProfile(format!(
                    "probabilities sum to {s} at t = {}",
                    grid.points()[i]
                )));
            }
        }
        if (values[0][0] - 1.0).abs() > NORM_TOL {
            return Err(NmdError::InvalidProfile(format!(
                "p_0(0) must be 1, got {}",
                values[0][0]
            )));
        }
        Ok(Self { d, grid, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn component(&self, a: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[a]).collect()
    }

    /// All weights at or above `-1e-10`: the generator yields a legitimate evolution.
    pub fn is_legitimate(&self) -> bool {
        self.values.iter().flatten().all(|&p| p >= -LEGIT_TOL)
    }

    /// Smallest weight over the whole profile.
    pub fn min_weight(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Running integrals `Gamma_k(t) = int_0^t gamma_k`, `k >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeRates {
    #[serde(rename = "dimension")]
    d: usize,
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
}

impl CumulativeRates {
    pub fn new(d: usize, grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(d)?;
        check_rows("cumulative rates", &grid, &values, d * d - 1)?;
        if values[0].iter().any(|&g| g != 0.0) {
            return Err(NmdError::InvalidProfile("Gamma(0) must vanish".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NmdError::InvalidProfile("cumulative rates must be finite".into()));
        }
        Ok(Self { d, grid, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[k - 1]).collect()
    }
}

/// Logarithmic derivatives `mu_a = lambda_a' / lambda_a` at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MuSeries {
    d: usize,
    grid: TimeGrid,
    values: Vec<Vec<Complex64>>,
}

impl MuSeries {
    pub fn new(d: usize, grid: TimeGrid, values: Vec<Vec<Complex64>>) -> Result<Self> {
        check_dim(d)?;
        check_rows("mu", &grid, &values, d * d)?;
        Ok(Self { d, grid, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i]
    }
}

/// `lambda(t) = H p(t)`.
pub fn lambdas_from_probs(p: &ProbabilityProfile) -> Result<Spectrum> {
    let h = Hadamard::new(p.dim())?;
    let values = p.values().iter().map(|row| h.apply_real(row)).collect();
    Spectrum::new(p.dim(), p.grid().clone(), values)
}

/// `p(t) = H lambda(t) / d^2`; fails if any `p_a` carries an imaginary part above 1e-9.
pub fn probs_from_lambdas(s: &Spectrum) -> Result<ProbabilityProfile> {
    let d = s.dim();
    let h = Hadamard::new(d)?;
    let scale = 1.0 / (d * d) as f64;
    let mut values = Vec::with_capacity(s.grid().len());
    for (i, row) in s.values().iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (a, z) in h.apply(row).into_iter().enumerate() {
            let z = z * scale;
            if z.im.abs() > IMAG_TOL {
                return Err(NmdError::NonHermitianSpectrum {
                    time: s.grid().points()[i],
                    index: a,
                    residue: z.im.abs(),
                });
            }
            out.push(z.re);
        }
        values.push(out);
    }
    ProbabilityProfile::new(d, s.grid().clone(), values)
}

/// Unwrap a sequence of angles so consecutive differences lie in `(-pi, pi]`.
fn unwrap_phase(raw: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (i, &a) in raw.iter().enumerate() {
        if i > 0 {
            let mut step = a - raw[i - 1];
            while step > PI {
                step -= TAU;
                offset -= TAU;
            }
            while step <= -PI {
                step += TAU;
                offset += TAU;
            }
        }
        out.push(a + offset);
    }
    out
}

/// `mu_a(t) = d/dt ln lambda_a(t)` by second-order finite differences of
/// `ln |lambda_a|` and of the unwrapped phase of `lambda_a`.
pub fn mu_from_spectrum(s: &Spectrum) -> Result<MuSeries> {
    let d = s.dim();
    let n = d * d;
    let grid = s.grid();
    for (i, row) in s.values().iter().enumerate() {
        if let Some((a, z)) = row
            .iter()
            .enumerate()
            .find(|(_, z)| z.norm() < SINGULARITY_FLOOR)
        {
            return Err(NmdError::SpectrumSingularity {
                time: grid.points()[i],
                index: a,
                modulus: z.norm(),
            });
        }
    }
    let mut values = vec![vec![Complex64::new(0.0, 0.0); n]; grid.len()];
    for a in 1..n {
        let comp = s.component(a);
        let log_mod: Vec<f64> = comp.iter().map(|z| z.norm().ln()).collect();
        let raw_arg: Vec<f64> = comp.iter().map(|z| z.arg()).collect();
        let d_mod = finite_difference(grid, &log_mod);
        let d_arg = if raw_arg.iter().all(|&x| x == 0.0) {
            vec![0.0; grid.len()]
        } else {
            finite_difference(grid, &unwrap_phase(&raw_arg))
        };
        for (i, row) in values.iter_mut().enumerate() {
            row[a] = Complex64::new(d_mod[i], d_arg[i]);
        }
    }
    MuSeries::new(d, grid.clone(), values)
}

/// `gamma_a = (H mu)_a / d^2` for `a >= 1`.
pub fn rates_from_mu(mu: &MuSeries) -> Result<RateProfile> {
    let d = mu.dim();
    let n = d * d;
    let h = Hadamard::new(d)?;
    let scale = 1.0 / n as f64;
    let mut values = Vec::with_capacity(mu.grid().len());
    for (i, row) in mu.values().iter().enumerate() {
        let t = mu.grid().points()[i];
        let mag = row.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if row[0].norm() > IMAG_TOL * mag {
            return Err(NmdError::InvalidProfile(format!(
                "mu_0 must vanish, got {} at t = {t}",
                row[0]
            )));
        }
        let full: Vec<Complex64> = h.apply(row).into_iter().map(|z| z * scale).collect();
        let mut out = Vec::with_capacity(n - 1);
        for (a, z) in full.iter().enumerate().skip(1) {
            if z.im.abs() > IMAG_TOL * mag {
                return Err(NmdError::NonRealRates {
                    time: t,
                    index: a,
                    residue: z.im.abs(),
                });
            }
            out.push(z.re);
        }
        // gamma_0 from row 0 of H must equal -sum gamma_k
        let sum: f64 = out.iter().sum();
        debug_assert!((full[0].re + sum).abs() <= 1e-10 * mag.max(1.0) + IMAG_TOL);
        values.push(out);
    }
    RateProfile::new(d, mu.grid().clone(), values)
}

/// Composite-trapezoid running integral of the sampled rates.
pub fn cumulative(r: &RateProfile) -> CumulativeRates {
    let n = r.dim() * r.dim();
    let grid = r.grid();
    let cols: Vec<Vec<f64>> = (1..n)
        .map(|k| trapezoid_cumulative(grid, &r.component(k)))
        .collect();
    let values = (0..grid.len())
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect();
    CumulativeRates::new(r.dim(), grid.clone(), values).expect("trapezoid output is well formed")
}

/// Running integral of a rate *function* (not samples): 8-point
/// Gauss-Legendre on every grid interval. Used for closed-form rate models,
/// where the sampled trapezoid rule would dominate the error budget.
pub fn cumulative_from_fn(
    d: usize,
    grid: &TimeGrid,
    rates: impl Fn(f64) -> Vec<f64>,
) -> Result<CumulativeRates> {
    check_dim(d)?;
    let width = d * d - 1;
    let pts = grid.points();
    let mut acc = vec![0.0; width];
    let mut values = Vec::with_capacity(pts.len());
    values.push(acc.clone());
    for w in pts.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let g = rates(mid + half * x);
            if g.len() != width {
                return Err(NmdError::InvalidProfile(format!(
                    "rate function returned {} components, expected {width}",
                    g.len()
                )));
            }
            for (a, v) in acc.iter_mut().zip(g) {
                *a += half * wt * v;
            }
        }
        values.push(acc.clone());
    }
    CumulativeRates::new(d, grid.clone(), values)
}

/// `lambda_b(t) = exp(sum_{k>=1} (H_bk - 1) Gamma_k(t))`.
pub fn spectrum_from_cumulative(g: &CumulativeRates) -> Result<Spectrum> {
    let d = g.dim();
    let h = Hadamard::new(d)?;
    let n = d * d;
    let values = g
        .values()
        .iter()
        .map(|row| {
            (0..n)
                .map(|b| {
                    let exponent: Complex64 = row
                        .iter()
                        .enumerate()
                        .map(|(k, &gk)| (h.entry(b, k + 1) - 1.0) * gk)
                        .sum();
                    exponent.exp()
                })
                .collect()
        })
        .collect();
    Spectrum::new(d, g.grid().clone(), values)
}

/// Full pipeline from tabulated rates: trapezoid `Gamma`, then the spectrum.
pub fn spectrum_from_rates(r: &RateProfile) -> Result<Spectrum> {
    spectrum_from_cumulative(&cumulative(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.2]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.2, 0.2]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(TimeGrid::uniform(0.0, 10).is_err());
        assert!(TimeGrid::uniform(1.0, 1).is_err());
        let g = TimeGrid::uniform(5.0, 500).unwrap();
        assert_eq!(g.len(), 500);
        assert_eq!(g.t_max(), 5.0);
        let lg = TimeGrid::log_spaced(2.0, 50).unwrap();
        assert_eq!(lg.len(), 50);
        assert_eq!(lg.points()[0], 0.0);
        assert_abs_diff_eq!(lg.points()[1], 2e-4, epsilon = 1e-15);
        assert_eq!(lg.t_max(), 2.0);
        assert_eq!(g.nearest(2.503), 250);
        assert_eq!(g.nearest(-1.0), 0);
        assert_eq!(g.nearest(10.0), 499);
    }

    #[test]
    fn finite_difference_exact_on_quadratics() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.25, 0.3, 0.7, 1.0]).unwrap();
        let f: Vec<f64> = g.points().iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let df = finite_difference(&g, &f);
        for (t, v) in g.points().iter().zip(df) {
            assert_abs_diff_eq!(v, 6.0 * t - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_probabilities_give_unit_spectrum() {
        for d in 2..5 {
            let grid = TimeGrid::uniform(1.0, 3).unwrap();
            let mut row = vec![0.0; d * d];
            row[0] = 1.0;
            let p = ProbabilityProfile::new(d, grid, vec![row; 3]).unwrap();
            let s = lambdas_from_probs(&p).unwrap();
            for z in s.values().iter().flatten() {
                assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
            }
            let back = probs_from_lambdas(&s).unwrap();
            assert_eq!(back.row(2)[0], 1.0);
        }
    }

    #[test]
    fn qubit_tanh_point_spectrum() {
        // e^{-2ct} = 1/4
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let p = ProbabilityProfile::new(
            2,
            grid,
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![5.0 / 8.0, 3.0 / 16.0, 0.0, 3.0 / 16.0]],
        )
        .unwrap();
        let s = lambdas_from_probs(&p).unwrap();
        let expect = [1.0, 5.0 / 8.0, 0.25, 5.0 / 8.0];
        for (z, e) in s.row(1).iter().zip(expect) {
            assert_abs_diff_eq!(z.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_weights_depolarize() {
        for d in 2..5 {
            let n = d * d;
            let grid = TimeGrid::uniform(1.0, 2).unwrap();
            let mut first = vec![0.0; n];
            first[0] = 1.0;
            let p = ProbabilityProfile::new(d, grid, vec![first, vec![1.0 / n as f64; n]]).unwrap();
            let s = lambdas_from_probs(&p).unwrap();
            assert_abs_diff_eq!(s.row(1)[0].re, 1.0, epsilon = 1e-12);
            for z in &s.row(1)[1..] {
                assert!(z.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn non_hermitian_spectrum_rejected() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let row1 = vec![c(1.0), Complex64::new(0.5, 0.3), c(0.5), c(0.5)];
        let s = Spectrum::new(2, grid, vec![vec![c(1.0); 4], row1]).unwrap();
        // qubit characters are real, so a complex eigenvalue cannot come from real weights
        assert!(matches!(
            probs_from_lambdas(&s),
            Err(NmdError::NonHermitianSpectrum { .. })
        ));
    }

    #[test]
    fn spectrum_invariants_enforced() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        assert!(Spectrum::new(2, grid.clone(), vec![vec![c(1.0); 4], vec![c(0.9); 4]]).is_err());
        assert!(Spectrum::new(2, grid.clone(), vec![vec![c(0.5); 4], vec![c(1.0); 4]]).is_err());
        assert!(Spectrum::new(2, grid, vec![vec![c(1.0); 4]]).is_err());
    }

    #[test]
    fn mu_of_constant_spectrum_vanishes() {
        let grid = TimeGrid::uniform(1.0, 11).unwrap();
        let s = Spectrum::from_fn(3, grid, |_| vec![c(1.0); 9]).unwrap();
        let mu = mu_from_spectrum(&s).unwrap();
        assert!(mu.values().iter().flatten().all(|z| z.norm() == 0.0));
        let r = rates_from_mu(&mu).unwrap();
        assert!(r.values().iter().flatten().all(|&g| g.abs() < 1e-15));
    }

    #[test]
    fn mu_of_exponential() {
        let cst = 1.3;
        let grid = TimeGrid::uniform(1.0, 10_001).unwrap();
        let s = Spectrum::from_fn(2, grid, |t| {
            vec![c(1.0), c((-3.0 * cst * t).exp()), c(0.5 * (1.0 + (-2.0 * cst * t).exp())), c(1.0)]
        })
        .unwrap();
        let mu = mu_from_spectrum(&s).unwrap();
        for row in mu.values() {
            assert_abs_diff_eq!(row[1].re, -3.0 * cst, epsilon = 1e-6);
        }
        // (1 + e^{-2ct})/2 has log-derivative -c at t = 0
        assert_abs_diff_eq!(mu.row(0)[2].re, -cst, epsilon = 1e-6);
    }

    #[test]
    fn mu_singularity_reported() {
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let s = Spectrum::new(
            2,
            grid,
            vec![vec![c(1.0); 4], vec![c(1.0), c(0.0), c(0.5), c(0.5)], vec![c(1.0); 4]],
        )
        .unwrap();
        match mu_from_spectrum(&s) {
            Err(NmdError::SpectrumSingularity { index, time, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(time, 0.5);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn phase_unwrapping_follows_rotation() {
        // lambda = exp(i 3 t) winds past +-pi; the derivative must stay 3
        let grid = TimeGrid::uniform(3.0, 3001).unwrap();
        let raw: Vec<f64> = grid.points().iter().map(|t| Complex64::from_polar(1.0, 3.0 * t).arg()).collect();
        let unwrapped = unwrap_phase(&raw);
        let df = finite_difference(&grid, &unwrapped);
        assert!(df.iter().all(|v| (v - 3.0).abs() < 1e-9));
    }

    #[test]
    fn cumulative_examples() {
        let grid = TimeGrid::uniform(5.0, 5001).unwrap();
        let zero = RateProfile::from_fn(2, grid.clone(), |_| vec![0.0; 3]).unwrap();
        assert!(cumulative(&zero).values().iter().flatten().all(|&g| g == 0.0));

        let konst = RateProfile::from_fn(2, grid.clone(), |_| vec![0.7, -0.2, 0.0]).unwrap();
        let g = cumulative(&konst);
        for (t, row) in grid.points().iter().zip(g.values()) {
            assert_abs_diff_eq!(row[0], 0.7 * t, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1], -0.2 * t, epsilon = 1e-12);
        }

        let tanh = RateProfile::from_fn(2, grid.clone(), |t| vec![0.0, -0.5 * t.tanh(), 0.0]).unwrap();
        let g = cumulative(&tanh);
        for (t, row) in grid.points().iter().zip(g.values()) {
            assert_abs_diff_eq!(row[1], -0.5 * t.cosh().ln(), epsilon = 1e-6);
        }
    }

    #[test]
    fn gauss_cumulative_is_sharp() {
        let grid = TimeGrid::uniform(5.0, 500).unwrap();
        let g = cumulative_from_fn(2, &grid, |t| vec![0.0, -0.5 * t.tanh(), 1.0]).unwrap();
        for (t, row) in grid.points().iter().zip(g.values()) {
            assert_abs_diff_eq!(row[1], -0.5 * t.cosh().ln(), epsilon = 1e-12);
            assert_abs_diff_eq!(row[2], *t, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_cumulative_gives_unit_spectrum() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let g = CumulativeRates::new(3, grid, vec![vec![0.0; 8]; 4]).unwrap();
        let s = spectrum_from_cumulative(&g).unwrap();
        assert!(s.values().iter().flatten().all(|z| (z - 1.0).norm() == 0.0));
    }

    #[test]
    fn qubit_cumulative_spectrum() {
        // Pauli rates (c/2, c/2, -tanh) in Weyl order: sigma1 -> 1, sigma3 -> 2, sigma2 -> 3
        let cst = 0.8;
        let grid = TimeGrid::uniform(3.0, 31).unwrap();
        let vals = grid
            .points()
            .iter()
            .map(|&t| vec![cst * t / 2.0, -0.5 * (cst * t).cosh().ln(), cst * t / 2.0])
            .collect();
        let g = CumulativeRates::new(2, grid.clone(), vals).unwrap();
        let s = spectrum_from_cumulative(&g).unwrap();
        for (t, row) in grid.points().iter().zip(s.values()) {
            let e = (-2.0 * cst * t).exp();
            assert_abs_diff_eq!(row[2].re, e, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1].re, 0.5 * (1.0 + e), epsilon = 1e-12);
            assert_abs_diff_eq!(row[3].re, 0.5 * (1.0 + e), epsilon = 1e-12);
        }
    }

    #[test]
    fn rates_from_mu_rejects_nonzero_mu0() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let mu = MuSeries::new(2, grid, vec![vec![c(0.1), c(0.0), c(0.0), c(0.0)]; 2]).unwrap();
        assert!(rates_from_mu(&mu).is_err());
    }

    #[test]
    fn non_real_rates_rejected() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let row = vec![c(0.0), Complex64::new(-1.0, 0.5), c(-1.0), c(-1.0)];
        let mu = MuSeries::new(2, grid, vec![row.clone(), row]).unwrap();
        assert!(matches!(rates_from_mu(&mu), Err(NmdError::NonRealRates { .. })));
    }
}
