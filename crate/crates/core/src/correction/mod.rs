//! Physicality corrections for linear reconstructions.
//!
//! SGS and EO act on the spectrum only and leave eigenvectors alone. MLE and
//! iMLE search over physical states for the best fit to the count data.

mod cost;
mod eo;
mod imle;
mod mle;
mod sgs;

use std::time::Duration;

pub use cost::{loglike_cost, loglike_cost_from_probabilities, quadratic_cost};
pub use eo::{eo_correct, eo_eigenvalues, eval_fit, FitCurve, DEFAULT_FIT_CURVE_JSON};
pub use imle::{imle_correct, imle_correct_with, ImleOptions};
pub use mle::{mle_correct, mle_correct_with, MleOptions};
pub use sgs::{sgs_correct, sgs_eigenvalues};

use crate::density::{from_spectrum, DensityMatrix, Spectrum};
use crate::error::{Result, TomoError};
use crate::tolerance;

/// Upper bound on redistribution rounds for the spectral corrections.
pub const MAX_SPECTRAL_ROUNDS: usize = 1000;

#[derive(Debug, Clone)]
pub struct CorrectionReport {
    pub output: DensityMatrix,
    pub iterations: usize,
    pub cost_before: Option<f64>,
    pub cost_after: Option<f64>,
    pub wall_time: Duration,
    /// False when an iterative method stopped on its budget; `output` is
    /// then the best point found.
    pub converged: bool,
    /// Per-iteration cost, recorded only when requested.
    pub cost_trace: Vec<f64>,
}

/// One pass of nullify-and-redistribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionRound {
    /// Signed sum of the eigenvalues set to zero (`<= 0`).
    pub removed: f64,
    /// Sum of the corrections added to the kept eigenvalues.
    pub redistributed: f64,
    /// Strictly positive eigenvalues at the start of the round.
    pub positive_count: usize,
}

/// Corrected eigenvalues of a spectral method.
#[derive(Debug, Clone)]
pub struct SpectralCorrection {
    pub eigenvalues: Vec<f64>,
    /// `eigenvalues[k]` pairs with input eigenvector `order[k]`.
    pub order: Vec<usize>,
    pub rounds: Vec<CorrectionRound>,
}

impl SpectralCorrection {
    pub fn iterations(&self) -> usize {
        self.rounds.len()
    }

    /// Applies the corrected eigenvalues to the input eigenvectors.
    pub fn apply(&self, input: &Spectrum) -> DensityMatrix {
        let vectors = input.eigenvectors.select_columns(&self.order);
        from_spectrum(&Spectrum { eigenvalues: self.eigenvalues.clone(), eigenvectors: vectors })
    }
}

fn check_unit_sum(values: &[f64]) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > tolerance::SPECTRUM_SUM {
        return Err(TomoError::DegenerateInput(format!("eigenvalues sum to {sum}, expected 1")));
    }
    Ok(())
}
