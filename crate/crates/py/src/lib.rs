//! Python bindings. Profiles cross the boundary as plain lists: a time grid
//! plus one row of components per time, in flat Weyl order.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use nmd_core::channels::{DiagonalMap, MapKind};
use nmd_core::rates::{
    self, cumulative, lambdas_from_probs, mu_from_spectrum, probs_from_lambdas, rates_from_mu,
    spectrum_from_cumulative, ProbabilityProfile, RateProfile, Spectrum, TimeGrid,
};
use nmd_core::{divisibility, io, scenarios, witnesses, NmdError};

fn py_err(e: NmdError) -> PyErr {
    if e.is_numeric() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

type Rows<T> = Vec<Vec<T>>;

fn grid(times: Vec<f64>) -> PyResult<TimeGrid> {
    TimeGrid::new(times).map_err(py_err)
}

#[pyclass(name = "WeylBasis", module = "nmd", frozen)]
struct PyWeylBasis {
    inner: nmd_core::WeylBasis,
}

#[pymethods]
impl PyWeylBasis {
    #[new]
    fn new(d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: nmd_core::WeylBasis::new(d).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `U_alpha` as a nested list, `alpha = m * d + n`.
    fn operator(&self, alpha: usize) -> PyResult<Rows<Complex64>> {
        if alpha >= self.inner.len() {
            return Err(PyValueError::new_err(format!("alpha must be below {}", self.inner.len())));
        }
        let u = self.inner.operator(alpha);
        Ok((0..u.nrows()).map(|i| (0..u.ncols()).map(|j| u[(i, j)]).collect()).collect())
    }

    /// `(m, n)` of a flat index.
    fn index(&self, alpha: usize) -> PyResult<(usize, usize)> {
        let w = self.inner.index(alpha).map_err(py_err)?;
        Ok((w.m(), w.n()))
    }

    /// The character matrix `H`.
    fn hadamard(&self) -> Rows<Complex64> {
        let h = self.inner.hadamard().to_matrix();
        (0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)]).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("WeylBasis(d={})", self.inner.dim())
    }
}

/// `lambda(t) = H p(t)` for every row.
#[pyfunction]
fn spectrum_from_probs(d: usize, times: Vec<f64>, probs: Rows<f64>) -> PyResult<Rows<Complex64>> {
    let p = ProbabilityProfile::new(d, grid(times)?, probs).map_err(py_err)?;
    Ok(lambdas_from_probs(&p).map_err(py_err)?.values().to_vec())
}

/// `p(t) = H lambda(t) / d^2` for every row.
#[pyfunction]
fn probs_from_spectrum(d: usize, times: Vec<f64>, lambdas: Rows<Complex64>) -> PyResult<Rows<f64>> {
    let s = Spectrum::new(d, grid(times)?, lambdas).map_err(py_err)?;
    Ok(probs_from_lambdas(&s).map_err(py_err)?.values().to_vec())
}

/// Eigenvalues from tabulated rates `gamma_1 .. gamma_{d^2-1}` (trapezoid integration).
#[pyfunction]
fn spectrum_from_rates(d: usize, times: Vec<f64>, rates: Rows<f64>) -> PyResult<Rows<Complex64>> {
    let r = RateProfile::new(d, grid(times)?, rates).map_err(py_err)?;
    Ok(spectrum_from_cumulative(&cumulative(&r)).map_err(py_err)?.values().to_vec())
}

/// Rates recovered from eigenvalues by finite differences of `ln lambda`.
#[pyfunction]
fn rates_from_spectrum(d: usize, times: Vec<f64>, lambdas: Rows<Complex64>) -> PyResult<Rows<f64>> {
    let s = Spectrum::new(d, grid(times)?, lambdas).map_err(py_err)?;
    let mu = mu_from_spectrum(&s).map_err(py_err)?;
    Ok(rates_from_mu(&mu).map_err(py_err)?.values().to_vec())
}

#[pyfunction]
fn uniform_grid(t_max: f64, n_points: usize) -> PyResult<Vec<f64>> {
    Ok(TimeGrid::uniform(t_max, n_points).map_err(py_err)?.points().to_vec())
}

#[pyclass(name = "Scenario", module = "nmd", frozen)]
struct PyScenario {
    inner: scenarios::Scenario,
}

#[pymethods]
impl PyScenario {
    /// `pauli-tanh`, `qutrit-e3` or `unitary`.
    #[new]
    #[pyo3(signature = (name, c = 1.0, d = None))]
    fn new(name: &str, c: f64, d: Option<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: scenarios::by_name(name, c, d).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Conventional labels and their flat Weyl indices.
    #[getter]
    fn labels(&self) -> Vec<(String, usize)> {
        self.inner.labels.clone()
    }

    fn rates_at(&self, t: f64) -> Vec<f64> {
        self.inner.rates_at(t)
    }

    fn lambdas_at(&self, t: f64) -> Vec<Complex64> {
        self.inner.lambdas_at(t)
    }

    fn probs_at(&self, t: f64) -> Vec<f64> {
        self.inner.probs_at(t)
    }

    /// Rates sampled on a grid, ready for `classify`.
    fn rate_table(&self, times: Vec<f64>) -> PyResult<Rows<f64>> {
        Ok(self.inner.rate_profile(&grid(times)?).map_err(py_err)?.values().to_vec())
    }

    fn __repr__(&self) -> String {
        match self.inner.rate_constant() {
            Some(c) => format!("Scenario('{}', c={c})", self.inner.name),
            None => format!("Scenario('{}', d={})", self.inner.name, self.inner.dim()),
        }
    }
}

/// Divisibility report for a rate table, as a JSON string.
#[pyfunction]
fn classify(d: usize, times: Vec<f64>, rates: Rows<f64>) -> PyResult<String> {
    let r = RateProfile::new(d, grid(times)?, rates).map_err(py_err)?;
    let report = divisibility::classify(&r).map_err(py_err)?;
    io::to_json_string(&report).map_err(py_err)
}

/// `(k_certified, k_upper, cp_divisible)` at one instant.
#[pyfunction]
fn certify(d: usize, gammas: Vec<f64>) -> PyResult<(usize, usize, bool)> {
    let c = divisibility::certify(d, 0.0, &gammas).map_err(py_err)?;
    Ok((c.k_certified, c.k_upper, c.cp_divisible))
}

/// `(by_choi, by_coefficients, min_choi_eigenvalue)` for `X -> sum_a a_a U_a X U_a^dag`.
#[pyfunction]
fn cp_check(d: usize, coefficients: Vec<f64>) -> PyResult<(bool, bool, f64)> {
    let basis = nmd_core::WeylBasis::new(d).map_err(py_err)?;
    let map = DiagonalMap::new(d, coefficients, MapKind::Phi).map_err(py_err)?;
    let c = witnesses::cp_check(&basis, &map).map_err(py_err)?;
    Ok((c.by_choi, c.by_coefficients, c.min_choi_eigenvalue))
}

#[pymodule]
fn nmd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeylBasis>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(spectrum_from_probs, m)?)?;
    m.add_function(wrap_pyfunction!(probs_from_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_from_rates, m)?)?;
    m.add_function(wrap_pyfunction!(rates_from_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_grid, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(cp_check, m)?)?;
    m.add("SINGULARITY_FLOOR", rates::SINGULARITY_FLOOR)?;
    Ok(())
}
