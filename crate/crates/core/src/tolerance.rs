//! Numerical tolerances shared by every module.
//!
//! The constants are the defaults; [`Tolerances`] carries an overridable copy
//! for callers that load their thresholds from configuration.

use serde::{Deserialize, Serialize};

/// Max entrywise |A - A^H| accepted for a Hermitian matrix.
pub const HERMITIAN: f64 = 1e-10;
/// Eigenvalues at or above `-PHYSICAL` count as non-negative.
pub const PHYSICAL: f64 = 1e-10;
/// Eigenvalues below `-NON_PHYSICAL_HARD` are rejected by fidelity.
pub const NON_PHYSICAL_HARD: f64 = 1e-6;
/// Allowed deviation of a normalized trace from one.
pub const TRACE: f64 = 1e-10;
/// Eigenvalue-sum tolerance for correction inputs.
pub const SPECTRUM_SUM: f64 = 1e-9;
/// Floor applied to predicted probabilities in likelihood denominators.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub hermitian: f64,
    pub physical: f64,
    pub non_physical_hard: f64,
    pub trace: f64,
    pub spectrum_sum: f64,
    pub probability_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: HERMITIAN,
            physical: PHYSICAL,
            non_physical_hard: NON_PHYSICAL_HARD,
            trace: TRACE,
            spectrum_sum: SPECTRUM_SUM,
            probability_floor: PROBABILITY_FLOOR,
        }
    }
}
