//! k-divisibility certificates and the non-Markovianity degree bracket.
//!
//! For `Phi(X) = sum_i b_i U_i X U_i^dag - sum_j c_j U_j X U_j^dag` with
//! `N` negative terms and `k N < d`: if `b_i >= k / (d - k N) * sum_j c_j` for
//! every `i` then `Phi` is k-positive, and a violation for some `i` means
//! `Phi` is not (k+1)-positive. Applied to `Phi_t` from
//! [`crate::channels::phi_decomposition`] at every time, a k-positive
//! `Phi_t` for all `t` makes the evolution k-divisible.

use serde::{Deserialize, Serialize};

use crate::channels::phi_decomposition;
use crate::error::{NmdError, Result};
use crate::rates::RateProfile;

/// Absolute slack on every inequality; boundary cases count as satisfied.
pub const INEQ_TOL: f64 = 1e-10;

/// `true` iff `k N < d` and `min_i b_i >= k / (d - k N) * sum_j c_j`.
///
/// `true` certifies k-positivity. When `k N < d` and the result is `false`,
/// the map is not (k+1)-positive.
pub fn k_positivity_certificate(b: &[f64], c: &[f64], d: usize, k: i64) -> Result<bool> {
    if k <= 0 {
        return Err(NmdError::InvalidK(k));
    }
    if d < 2 {
        return Err(NmdError::InvalidDimension(d));
    }
    if b.len() + c.len() != d * d {
        return Err(NmdError::DimensionMismatch {
            expected: d * d,
            found: b.len() + c.len(),
        });
    }
    if b.iter().chain(c).any(|&x| x < 0.0) {
        return Err(NmdError::InvalidParameter(
            "b and c must be nonnegative".into(),
        ));
    }
    let k = k as usize;
    let n = c.len();
    if k * n >= d {
        return Ok(false);
    }
    let bound = k as f64 / (d - k * n) as f64 * c.iter().sum::<f64>();
    let min_b = b.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min_b >= bound - INEQ_TOL)
}

/// Levels `j >= 1` at which the inequality can be evaluated (`j N < d`).
fn feasible_levels(d: usize, n: usize) -> usize {
    (d - 1).checked_div(n).unwrap_or(d)
}

fn check_rates(d: usize, gammas: &[f64]) -> Result<()> {
    if d < 2 {
        return Err(NmdError::InvalidDimension(d));
    }
    if gammas.len() != d * d - 1 {
        return Err(NmdError::DimensionMismatch {
            expected: d * d - 1,
            found: gammas.len(),
        });
    }
    Ok(())
}

/// Every `d`-element subset of the rates has a nonnegative sum; equivalently
/// the `d` smallest rates do.
pub fn p_divisibility_condition(gammas: &[f64], d: usize) -> Result<bool> {
    check_rates(d, gammas)?;
    let mut sorted = gammas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[..d].iter().sum::<f64>() >= -INEQ_TOL)
}

/// Qutrit sufficient condition for 2-divisibility:
/// `gamma_i + 2 gamma_j >= 0` for all ordered pairs `i != j`.
pub fn two_divisibility_condition(gammas: &[f64]) -> Result<bool> {
    if gammas.len() != 8 {
        return Err(NmdError::WrongDimension {
            required: 3,
            found: dim_from_rates(gammas.len()),
        });
    }
    for (i, gi) in gammas.iter().enumerate() {
        for (j, gj) in gammas.iter().enumerate() {
            if i != j && gi + 2.0 * gj < -INEQ_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Qutrit triple condition: every three rates sum to a nonnegative number.
pub fn triple_condition(gammas: &[f64]) -> Result<bool> {
    if gammas.len() != 8 {
        return Err(NmdError::WrongDimension {
            required: 3,
            found: dim_from_rates(gammas.len()),
        });
    }
    p_divisibility_condition(gammas, 3)
}

/// Qubit CP condition on the map eigenvalues in Pauli labels:
/// `l1 + l2 <= 1 + l3` and cyclic permutations.
pub fn qubit_cp_map_condition(lambda_pauli: [f64; 3]) -> bool {
    let [l1, l2, l3] = lambda_pauli;
    l1 + l2 <= 1.0 + l3 + INEQ_TOL
        && l2 + l3 <= 1.0 + l1 + INEQ_TOL
        && l3 + l1 <= 1.0 + l2 + INEQ_TOL
}

/// `sum_k gamma_k >= 0`, i.e. `gamma_0 <= 0`.
pub fn geometric_condition(gammas: &[f64]) -> bool {
    gammas.iter().sum::<f64>() >= -INEQ_TOL
}

fn dim_from_rates(len: usize) -> usize {
    ((len + 1) as f64).sqrt().round() as usize
}

/// What the criteria say about one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisibilityCertificate {
    pub time: f64,
    /// All `gamma_k >= 0`.
    pub cp_divisible: bool,
    /// Largest k for which the inequality certifies `Phi_t` k-positive (0 if none).
    pub k_certified: usize,
    /// Upper bound on the positivity level of `Phi_t` from the first violated
    /// level, capped at `d - 1` when some rate is negative.
    pub k_upper: usize,
    /// Number of negative coefficients of `Phi_t`.
    pub negatives: usize,
    pub p_condition: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_div_condition: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triple_condition: Option<bool>,
    pub geometric_condition: bool,
}

pub fn certify(d: usize, time: f64, gammas: &[f64]) -> Result<DivisibilityCertificate> {
    check_rates(d, gammas)?;
    let split = phi_decomposition(d, gammas)?;
    let (b, c) = (split.b(), split.c());
    let n = split.n();
    let cp_divisible = gammas.iter().all(|&g| g >= -INEQ_TOL);

    let mut k_certified = 0;
    let mut first_violation = None;
    for level in 1..=feasible_levels(d, n) {
        if k_positivity_certificate(&b, &c, d, level as i64)? {
            k_certified = level;
        } else {
            first_violation = Some(level);
            break;
        }
    }
    let p_condition = p_divisibility_condition(gammas, d)?;
    let mut k_upper = match first_violation {
        Some(level) => level,
        None if n == 0 => d,
        None => d - 1,
    };
    if cp_divisible {
        k_certified = d;
        k_upper = d;
    } else {
        k_upper = k_upper.min(d - 1);
    }
    // For qubits the pairwise conditions are also necessary for P-divisibility.
    if d == 2 && !p_condition {
        k_upper = 0;
    }
    let (two_div_condition, triple) = if d == 3 {
        (
            Some(two_divisibility_condition(gammas)?),
            Some(triple_condition(gammas)?),
        )
    } else {
        (None, None)
    };
    Ok(DivisibilityCertificate {
        time,
        cp_divisible,
        k_certified,
        k_upper,
        negatives: n,
        p_condition,
        two_div_condition,
        triple_condition: triple,
        geometric_condition: geometric_condition(gammas),
    })
}

/// First grid time at which each condition failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FirstViolations {
    pub cp: Option<f64>,
    pub p_condition: Option<f64>,
    pub two_div: Option<f64>,
    pub triple: Option<f64>,
    pub geometric: Option<f64>,
    /// First time at which no level could be certified.
    pub uncertified: Option<f64>,
}

/// Bounds on divisibility (and hence on `NMD = d - k`) over the whole grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmdBracket {
    /// k-divisibility established at every time (sufficient criteria).
    pub divisibility_lower: usize,
    /// Largest divisibility level compatible with the necessary criteria.
    pub divisibility_upper: usize,
    pub nmd_lower: usize,
    pub nmd_upper: usize,
    pub first_violations: FirstViolations,
    /// Maximal runs of grid times `[start, end]` where nothing could be
    /// certified yet essential non-Markovianity is not established either.
    pub unresolved_intervals: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Markovian,
    /// Non-Markovian, certified k-divisible with `1 <= k < d`.
    KDivisible,
    /// Not CP-divisible and no positivity certificate everywhere, not proven essentially non-Markovian.
    Undetermined,
    EssentiallyNonMarkovian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisibilityReport {
    pub d: usize,
    pub verdict: Verdict,
    pub summary: String,
    pub bracket: NmdBracket,
    pub certificates: Vec<DivisibilityCertificate>,
}

/// Classify a rate profile time by time and bracket its non-Markovianity degree.
pub fn classify(r: &RateProfile) -> Result<DivisibilityReport> {
    let d = r.dim();
    let times = r.grid().points();
    let certificates = times
        .iter()
        .zip(r.values())
        .map(|(&t, g)| certify(d, t, g))
        .collect::<Result<Vec<_>>>()?;

    let lower = certificates.iter().map(|c| c.k_certified).min().unwrap_or(d);
    let upper = certificates.iter().map(|c| c.k_upper).min().unwrap_or(d);

    let first = |pred: &dyn Fn(&DivisibilityCertificate) -> bool| {
        certificates.iter().find(|c| pred(c)).map(|c| c.time)
    };
    let first_violations = FirstViolations {
        cp: first(&|c| !c.cp_divisible),
        p_condition: first(&|c| !c.p_condition),
        two_div: first(&|c| c.two_div_condition == Some(false)),
        triple: first(&|c| c.triple_condition == Some(false)),
        geometric: first(&|c| !c.geometric_condition),
        uncertified: first(&|c| c.k_certified == 0),
    };

    let mut unresolved_intervals = Vec::new();
    let mut run: Option<[f64; 2]> = None;
    for c in &certificates {
        if c.k_certified == 0 && c.k_upper > 0 {
            run = Some(match run {
                Some([s, _]) => [s, c.time],
                None => [c.time, c.time],
            });
        } else if let Some(iv) = run.take() {
            unresolved_intervals.push(iv);
        }
    }
    if let Some(iv) = run {
        unresolved_intervals.push(iv);
    }

    let verdict = if lower == d {
        Verdict::Markovian
    } else if lower >= 1 {
        Verdict::KDivisible
    } else if upper == 0 {
        Verdict::EssentiallyNonMarkovian
    } else {
        Verdict::Undetermined
    };
    let summary = match verdict {
        Verdict::Markovian => "CP-divisible (Markovian), NMD = 0".to_string(),
        Verdict::KDivisible if lower == 1 && upper == 1 => {
            format!("P-divisible, not CP-divisible; NMD = {}", d - 1)
        }
        Verdict::KDivisible if lower == 1 => format!(
            "non-Markovian but P-divisible; certified {lower}-divisible, at most {upper}-divisible"
        ),
        Verdict::KDivisible => format!(
            "non-Markovian; certified {lower}-divisible, at most {upper}-divisible"
        ),
        Verdict::Undetermined => format!(
            "non-Markovian; no positivity certificate on the whole grid, at most {upper}-divisible"
        ),
        Verdict::EssentiallyNonMarkovian => {
            "essentially non-Markovian (not P-divisible), NMD = d".to_string()
        }
    };

    Ok(DivisibilityReport {
        d,
        verdict,
        summary,
        bracket: NmdBracket {
            divisibility_lower: lower,
            divisibility_upper: upper,
            nmd_lower: d - upper,
            nmd_upper: d - lower,
            first_violations,
            unresolved_intervals,
        },
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::TimeGrid;
    use proptest::prelude::*;

    #[test]
    fn certificate_examples() {
        // N = 0
        for k in 1..=3 {
            assert!(k_positivity_certificate(&[0.1; 9], &[], 3, k).unwrap());
        }
        let c = [0.2];
        assert!(k_positivity_certificate(&[1.0; 8], &c, 3, 2).unwrap());
        let mut b = [1.0; 8];
        b[3] = 0.3;
        assert!(!k_positivity_certificate(&b, &c, 3, 2).unwrap());
        assert!(k_positivity_certificate(&b, &c, 3, 1).unwrap());
        // kN >= d
        assert!(!k_positivity_certificate(&[1.0; 7], &[0.1, 0.1], 3, 2).unwrap());
    }

    #[test]
    fn certificate_errors() {
        assert_eq!(
            k_positivity_certificate(&[1.0; 4], &[], 2, 0).unwrap_err(),
            NmdError::InvalidK(0)
        );
        assert!(k_positivity_certificate(&[1.0; 3], &[], 2, 1).is_err());
        assert!(k_positivity_certificate(&[1.0; 3], &[-0.1], 2, 1).is_err());
    }

    #[test]
    fn p_condition_examples() {
        assert!(p_divisibility_condition(&[0.1; 3], 2).unwrap());
        let c = 1.0;
        for t in [0.0, 0.3, 1.0, 5.0, 50.0] {
            let g = [c / 2.0, -c / 2.0 * f64::tanh(c * t), c / 2.0];
            assert!(p_divisibility_condition(&g, 2).unwrap());
        }
        let mut e3 = vec![c / 3.0; 8];
        let t: f64 = 2f64.ln() / 3.0 + 0.05;
        let e = (-3.0 * c * t).exp();
        let gamma = -(2.0 * c / 3.0) * (1.0 - e) / (1.0 + 2.0 * e);
        e3[3] = gamma;
        e3[7] = gamma;
        assert!(!p_divisibility_condition(&e3, 3).unwrap());
        assert!(p_divisibility_condition(&[0.0; 4], 3).is_err());
    }

    #[test]
    fn two_div_examples() {
        assert!(two_divisibility_condition(&[0.0; 8]).unwrap());
        let mut g = [1.0; 8];
        g[4] = -0.4;
        assert!(two_divisibility_condition(&g).unwrap());
        let mut g = [1.0; 8];
        g[7] = -0.6;
        assert!(!two_divisibility_condition(&g).unwrap());
        assert_eq!(
            two_divisibility_condition(&[0.0; 3]).unwrap_err(),
            NmdError::WrongDimension { required: 3, found: 2 }
        );
    }

    #[test]
    fn qubit_lambda_examples() {
        assert!(qubit_cp_map_condition([1.0, 1.0, 1.0]));
        for t in [0.0, 0.5, 2.0] {
            let e = f64::exp(-2.0 * t);
            assert!(qubit_cp_map_condition([(1.0 + e) / 2.0, (1.0 + e) / 2.0, e]));
        }
        assert!(!qubit_cp_map_condition([0.9, 0.9, 0.5]));
    }

    #[test]
    fn geometric_examples() {
        assert!(geometric_condition(&[0.0, 0.2, 0.1]));
        assert!(geometric_condition(&[0.5, -0.5 * f64::tanh(3.0), 0.5]));
        assert!(!geometric_condition(&[0.1, 0.1, -0.5]));
    }

    #[test]
    fn markovian_profile_has_zero_nmd() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let r = RateProfile::from_fn(3, grid, |t| vec![0.1 + t; 8]).unwrap();
        let rep = classify(&r).unwrap();
        assert_eq!(rep.verdict, Verdict::Markovian);
        assert_eq!(rep.bracket.nmd_lower, 0);
        assert_eq!(rep.bracket.nmd_upper, 0);
        assert!(rep.certificates.iter().all(|c| c.k_certified == 3));
    }

    #[test]
    fn qubit_pair_violation_is_essential() {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let r = RateProfile::from_fn(2, grid, |_| vec![0.1, -0.5, 0.1]).unwrap();
        let rep = classify(&r).unwrap();
        assert_eq!(rep.verdict, Verdict::EssentiallyNonMarkovian);
        assert_eq!(rep.bracket.nmd_lower, 2);
        assert_eq!(rep.bracket.nmd_upper, 2);
        assert!(rep.bracket.unresolved_intervals.is_empty());
    }

    #[test]
    fn unresolved_run_is_reported() {
        // qutrit with two negatives beyond the triple threshold
        let grid = TimeGrid::uniform(1.0, 11).unwrap();
        let r = RateProfile::from_fn(3, grid, |t| {
            let mut g = vec![1.0 / 3.0; 8];
            let neg = if t > 0.45 { -0.4 } else { -0.1 };
            g[3] = neg;
            g[7] = neg;
            g
        })
        .unwrap();
        let rep = classify(&r).unwrap();
        assert_eq!(rep.verdict, Verdict::Undetermined);
        assert_eq!(rep.bracket.unresolved_intervals, vec![[0.5, 1.0]]);
        assert_eq!(rep.bracket.first_violations.triple, Some(0.5));
        assert_eq!(rep.bracket.divisibility_upper, 1);
        assert_eq!(rep.bracket.nmd_upper, 3);
        assert_eq!(rep.bracket.nmd_lower, 2);
    }

    proptest! {
        #[test]
        fn certificate_monotone_in_k(
            raw in proptest::collection::vec(-1.0f64..2.0, 8),
        ) {
            let d = 3;
            let split = phi_decomposition(d, &raw).unwrap();
            let (b, c) = (split.b(), split.c());
            for k in 2..=d as i64 {
                if k_positivity_certificate(&b, &c, d, k).unwrap() && ((k - 1) as usize) * c.len() < d {
                    prop_assert!(k_positivity_certificate(&b, &c, d, k - 1).unwrap());
                }
            }
        }

        #[test]
        fn p_condition_matches_subset_enumeration(
            raw in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            // enumerate all C(8,3) triples
            let mut brute = true;
            for i in 0..8 {
                for j in i + 1..8 {
                    for k in j + 1..8 {
                        if raw[i] + raw[j] + raw[k] < -INEQ_TOL {
                            brute = false;
                        }
                    }
                }
            }
            prop_assert_eq!(p_divisibility_condition(&raw, 3).unwrap(), brute);
            let q = &raw[..3];
            let pairs = q[0] + q[1] >= -INEQ_TOL && q[0] + q[2] >= -INEQ_TOL && q[1] + q[2] >= -INEQ_TOL;
            prop_assert_eq!(p_divisibility_condition(q, 2).unwrap(), pairs);
        }

        #[test]
        fn certificate_fields_consistent(
            raw in proptest::collection::vec(-1.0f64..2.0, 3),
        ) {
            let c = certify(2, 0.0, &raw).unwrap();
            if c.cp_divisible {
                prop_assert_eq!(c.k_certified, 2);
            }
            prop_assert!(c.k_certified <= c.k_upper);
        }

        #[test]
        fn classify_is_order_independent(
            raw in proptest::collection::vec(proptest::collection::vec(-1.0f64..2.0, 3), 4),
        ) {
            let grid = TimeGrid::uniform(1.0, 4).unwrap();
            let a = classify(&RateProfile::new(2, grid.clone(), raw.clone()).unwrap()).unwrap();
            let mut rev = raw.clone();
            rev.reverse();
            let b = classify(&RateProfile::new(2, grid, rev).unwrap()).unwrap();
            prop_assert_eq!(a.bracket.divisibility_lower, b.bracket.divisibility_lower);
            prop_assert_eq!(a.bracket.divisibility_upper, b.bracket.divisibility_upper);
            for (x, y) in a.certificates.iter().zip(b.certificates.iter().rev()) {
                prop_assert_eq!(x.k_certified, y.k_certified);
                prop_assert_eq!(x.p_condition, y.p_condition);
            }
        }
    }
}
