//! Random unitary evolutions of a d-level system.
//!
//! A random unitary dynamical map `Lambda_t(rho) = sum_a p_a(t) U_a rho U_a^dag`
//! over the Weyl operators is diagonal in the Weyl basis, so its eigenvalues,
//! Kraus weights and time-local decoherence rates are all related by the
//! character matrix of the Weyl group. This crate converts between those
//! descriptions, builds the corresponding maps, certifies k-divisibility of
//! the evolution from its rates, and evaluates the usual non-Markovianity
//! witnesses (trace distance, entropy, volume of accessible states).

pub mod channels;
pub mod divisibility;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rates;
pub mod scenarios;
pub mod weyl;
pub mod witnesses;

pub use channels::{DensityMatrix, DiagonalMap, MapKind, PhiDecomposition, PropagatorSlice};
pub use divisibility::{classify, DivisibilityCertificate, DivisibilityReport, NmdBracket, Verdict};
pub use error::{NmdError, Result};
pub use rates::{CumulativeRates, MuSeries, ProbabilityProfile, RateProfile, Spectrum, TimeGrid};
pub use scenarios::{Mixture, Scenario, ScenarioKind};
pub use weyl::{Hadamard, WeylBasis, WeylIndex};
pub use witnesses::{ChoiMatrix, CpCheck, FalsifierWitness, VolumeMeasure, WitnessTrace};
