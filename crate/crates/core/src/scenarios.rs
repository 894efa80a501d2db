//! Closed-form evolutions with exact evaluators for rates, spectra and weights.
//!
//! All vectors use flat Weyl order. For qubits the Pauli labels map as
//! `sigma_1 -> 1 (X)`, `sigma_3 -> 2 (Z)`, `sigma_2 -> 3 (ZX = i sigma_2)`;
//! the phase between `ZX` and `sigma_2` cancels under conjugation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NmdError, Result};
use crate::rates::{
    cumulative_from_fn, CumulativeRates, ProbabilityProfile, RateProfile, Spectrum, TimeGrid,
};
use crate::weyl::Hadamard;

/// Which closed-form model a [`Scenario`] evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Qubit: `gamma_1 = gamma_2 = c/2`, `gamma_3 = -(c/2) tanh(ct)` (Pauli labels).
    PauliTanh { c: f64 },
    /// Qutrit: `c/3` on six Weyl directions, a common negative rate on indices 4 and 8.
    QutritE3 { c: f64 },
    /// Constant rates: a Markovian semigroup.
    Semigroup { d: usize, rates: Vec<f64> },
    /// No dissipation at all.
    Unitary { d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    /// Conventional labels paired with flat Weyl indices.
    pub labels: Vec<(String, usize)>,
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(NmdError::InvalidParameter(format!(
            "rate constant c must be positive, got {c}"
        )));
    }
    Ok(())
}

fn weyl_labels(d: usize) -> Vec<(String, usize)> {
    (0..d * d).map(|a| (format!("U{a}"), a)).collect()
}

/// The qubit model with rates `(c/2, c/2, -(c/2) tanh(ct))` in Pauli labels.
///
/// Its weights are `p_{sigma_1} = p_{sigma_2} = (1 - e^{-2ct}) / 4`,
/// `p_{sigma_3} = 0` and its eigenvalues `(1 + e^{-2ct}) / 2` twice and
/// `e^{-2ct}` on `sigma_3`.
pub fn pauli_tanh(c: f64) -> Result<Scenario> {
    check_c(c)?;
    Ok(Scenario {
        name: "pauli-tanh".into(),
        kind: ScenarioKind::PauliTanh { c },
        labels: vec![
            ("I".into(), 0),
            ("sigma_1".into(), 1),
            ("sigma_3".into(), 2),
            ("sigma_2".into(), 3),
        ],
    })
}

/// The qutrit model: `gamma_k = c/3` for `k` outside `{4, 8}` and
/// `gamma_4 = gamma_8 = -(2c/3)(1 - e^{-3ct}) / (1 + 2 e^{-3ct})`, tuned so that
/// `p_4 = p_8 = 0`.
pub fn qutrit_e3(c: f64) -> Result<Scenario> {
    check_c(c)?;
    Ok(Scenario {
        name: "qutrit-e3".into(),
        kind: ScenarioKind::QutritE3 { c },
        labels: weyl_labels(3),
    })
}

pub fn semigroup(d: usize, rates: Vec<f64>) -> Result<Scenario> {
    if d < 2 {
        return Err(NmdError::InvalidDimension(d));
    }
    if rates.len() != d * d - 1 {
        return Err(NmdError::DimensionMismatch {
            expected: d * d - 1,
            found: rates.len(),
        });
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(NmdError::InvalidParameter("rates must be finite".into()));
    }
    Ok(Scenario {
        name: "semigroup".into(),
        kind: ScenarioKind::Semigroup { d, rates },
        labels: weyl_labels(d),
    })
}

pub fn unitary(d: usize) -> Result<Scenario> {
    if d < 2 {
        return Err(NmdError::InvalidDimension(d));
    }
    Ok(Scenario {
        name: "unitary".into(),
        kind: ScenarioKind::Unitary { d },
        labels: weyl_labels(d),
    })
}

/// Look up a built-in scenario by its CLI name.
pub fn by_name(name: &str, c: f64, d: Option<usize>) -> Result<Scenario> {
    match name {
        "pauli-tanh" => pauli_tanh(c),
        "qutrit-e3" => qutrit_e3(c),
        "unitary" => unitary(d.unwrap_or(2)),
        other => Err(NmdError::InvalidParameter(format!(
            "unknown scenario '{other}' (expected pauli-tanh, qutrit-e3 or unitary)"
        ))),
    }
}

/// Equal-or-weighted convex combination of scenarios, acting as
/// `sum_j w_j Lambda^{(j)}_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<Scenario>,
    pub weights: Vec<f64>,
}

impl Mixture {
    /// Eigenvalues of the mixed map (eigenvalues mix linearly since all
    /// components are diagonal in the same basis).
    pub fn lambdas_at(&self, t: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.components[0].dim() * self.components[0].dim()];
        for (s, &w) in self.components.iter().zip(&self.weights) {
            for (o, l) in out.iter_mut().zip(s.lambdas_at(t)) {
                *o += l * w;
            }
        }
        out
    }

    pub fn probs_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.components[0].dim() * self.components[0].dim()];
        for (s, &w) in self.components.iter().zip(&self.weights) {
            for (o, p) in out.iter_mut().zip(s.probs_at(t)) {
                *o += p * w;
            }
        }
        out
    }
}

/// Two dephasing semigroups `g [sigma_k rho sigma_k - rho]`, `k = 1, 2`, with
/// `g = c`, mixed half and half. This reproduces [`pauli_tanh`]`(c)` exactly.
pub fn pauli_tanh_mixture(c: f64) -> Result<Mixture> {
    check_c(c)?;
    let g = c;
    Ok(Mixture {
        components: vec![semigroup(2, vec![g, 0.0, 0.0])?, semigroup(2, vec![0.0, 0.0, g])?],
        weights: vec![0.5, 0.5],
    })
}

/// Three semigroups `c [U_i rho U_i^dag + U_j rho U_j^dag - 2 rho]` over the
/// commuting pairs `{1,2}`, `{3,6}`, `{5,7}`, mixed in equal thirds. This
/// reproduces [`qutrit_e3`]`(c)` exactly.
pub fn qutrit_e3_mixture(c: f64) -> Result<Mixture> {
    check_c(c)?;
    let pair = |i: usize, j: usize| {
        let mut r = vec![0.0; 8];
        r[i - 1] = c;
        r[j - 1] = c;
        semigroup(3, r)
    };
    Ok(Mixture {
        components: vec![pair(1, 2)?, pair(3, 6)?, pair(5, 7)?],
        weights: vec![1.0 / 3.0; 3],
    })
}

fn e3_gamma(c: f64, t: f64) -> f64 {
    let e = (-3.0 * c * t).exp();
    -(2.0 * c / 3.0) * (1.0 - e) / (1.0 + 2.0 * e)
}

impl Scenario {
    pub fn dim(&self) -> usize {
        match &self.kind {
            ScenarioKind::PauliTanh { .. } => 2,
            ScenarioKind::QutritE3 { .. } => 3,
            ScenarioKind::Semigroup { d, .. } | ScenarioKind::Unitary { d } => *d,
        }
    }

    /// Rate constant, if the scenario has one.
    pub fn rate_constant(&self) -> Option<f64> {
        match self.kind {
            ScenarioKind::PauliTanh { c } | ScenarioKind::QutritE3 { c } => Some(c),
            _ => None,
        }
    }

    /// `gamma_1 .. gamma_{d^2-1}` at time `t`.
    pub fn rates_at(&self, t: f64) -> Vec<f64> {
        match &self.kind {
            ScenarioKind::PauliTanh { c } => {
                let half = c / 2.0;
                vec![half, -half * (c * t).tanh(), half]
            }
            ScenarioKind::QutritE3 { c } => {
                let g = e3_gamma(*c, t);
                let mut r = vec![c / 3.0; 8];
                r[3] = g;
                r[7] = g;
                r
            }
            ScenarioKind::Semigroup { rates, .. } => rates.clone(),
            ScenarioKind::Unitary { d } => vec![0.0; d * d - 1],
        }
    }

    /// `Gamma_k(t) = int_0^t gamma_k`, closed form.
    pub fn cumulative_at(&self, t: f64) -> Vec<f64> {
        match &self.kind {
            ScenarioKind::PauliTanh { c } => {
                let half = c * t / 2.0;
                vec![half, -0.5 * (c * t).cosh().ln(), half]
            }
            ScenarioKind::QutritE3 { c } => {
                let g = e3_cumulative(*c, t);
                let mut r = vec![c * t / 3.0; 8];
                r[3] = g;
                r[7] = g;
                r
            }
            ScenarioKind::Semigroup { rates, .. } => rates.iter().map(|r| r * t).collect(),
            ScenarioKind::Unitary { d } => vec![0.0; d * d - 1],
        }
    }

    /// Eigenvalues `lambda_0 .. lambda_{d^2-1}` at time `t`, closed form.
    pub fn lambdas_at(&self, t: f64) -> Vec<Complex64> {
        let re = |v: f64| Complex64::new(v, 0.0);
        match &self.kind {
            ScenarioKind::PauliTanh { c } => {
                let e = (-2.0 * c * t).exp();
                let l = 0.5 * (1.0 + e);
                vec![re(1.0), re(l), re(e), re(l)]
            }
            ScenarioKind::QutritE3 { c } => {
                let e = (-3.0 * c * t).exp();
                let l = (1.0 + 2.0 * e) / 3.0;
                let mut v = vec![re(l); 9];
                v[0] = re(1.0);
                v[4] = re(e);
                v[8] = re(e);
                v
            }
            ScenarioKind::Semigroup { d, rates } => {
                let h = Hadamard::new(*d).expect("validated dimension");
                (0..d * d)
                    .map(|b| {
                        let ex: Complex64 = rates
                            .iter()
                            .enumerate()
                            .map(|(k, &g)| (h.entry(b, k + 1) - 1.0) * (g * t))
                            .sum();
                        ex.exp()
                    })
                    .collect()
            }
            ScenarioKind::Unitary { d } => vec![re(1.0); d * d],
        }
    }

    /// Kraus weights `p_0 .. p_{d^2-1}` at time `t`, closed form.
    pub fn probs_at(&self, t: f64) -> Vec<f64> {
        match &self.kind {
            ScenarioKind::PauliTanh { c } => {
                let q = 0.25 * (1.0 - (-2.0 * c * t).exp());
                vec![1.0 - 2.0 * q, q, 0.0, q]
            }
            ScenarioKind::QutritE3 { c } => {
                let q = (1.0 - (-3.0 * c * t).exp()) / 9.0;
                let mut v = vec![q; 9];
                v[0] = 1.0 - 6.0 * q;
                v[4] = 0.0;
                v[8] = 0.0;
                v
            }
            ScenarioKind::Semigroup { d, .. } => {
                let h = Hadamard::new(*d).expect("validated dimension");
                let n = (d * d) as f64;
                h.apply(&self.lambdas_at(t))
                    .into_iter()
                    .map(|z| z.re / n)
                    .collect()
            }
            ScenarioKind::Unitary { d } => {
                let mut v = vec![0.0; d * d];
                v[0] = 1.0;
                v
            }
        }
    }

    pub fn rate_profile(&self, grid: &TimeGrid) -> Result<RateProfile> {
        RateProfile::from_fn(self.dim(), grid.clone(), |t| self.rates_at(t))
    }

    pub fn spectrum(&self, grid: &TimeGrid) -> Result<Spectrum> {
        Spectrum::from_fn(self.dim(), grid.clone(), |t| self.lambdas_at(t))
    }

    pub fn probabilities(&self, grid: &TimeGrid) -> Result<ProbabilityProfile> {
        let values = grid.points().iter().map(|&t| self.probs_at(t)).collect();
        ProbabilityProfile::new(self.dim(), grid.clone(), values)
    }

    /// `Gamma` from the closed-form antiderivatives.
    pub fn cumulative_exact(&self, grid: &TimeGrid) -> Result<CumulativeRates> {
        let values = grid.points().iter().map(|&t| self.cumulative_at(t)).collect();
        CumulativeRates::new(self.dim(), grid.clone(), values)
    }

    /// `Gamma` by Gauss-Legendre quadrature of the rate function on each grid interval.
    pub fn cumulative_quadrature(&self, grid: &TimeGrid) -> Result<CumulativeRates> {
        cumulative_from_fn(self.dim(), grid, |t| self.rates_at(t))
    }
}

/// `int_0^t gamma(s) ds` for the qutrit negative rate. With `u = e^{3cs}`,
/// `(u - 1)/(u + 2) = 1 - 3/(u + 2)`, which integrates in closed form.
fn e3_cumulative(c: f64, t: f64) -> f64 {
    let e = (-3.0 * c * t).exp();
    -(2.0 * c / 3.0) * t + (3.0 / (1.0 + 2.0 * e)).ln() / 3.0
}
