use std::time::Instant;

use super::{check_unit_sum, CorrectionReport, CorrectionRound, SpectralCorrection, MAX_SPECTRAL_ROUNDS};
use crate::density::Spectrum;
use crate::error::{Result, TomoError};

/// Zero the negative eigenvalues, spread their (signed) sum evenly over the
/// positive ones, and repeat while new negatives appear.
///
/// `values` must be sorted in descending order and sum to one. The output
/// stays sorted.
pub fn sgs_eigenvalues(values: &[f64]) -> Result<SpectralCorrection> {
    check_unit_sum(values)?;
    let mut lambdas = values.to_vec();
    let mut rounds = Vec::new();
    while lambdas.iter().any(|&v| v < 0.0) {
        if rounds.len() == MAX_SPECTRAL_ROUNDS {
            return Err(TomoError::NoConvergence { iterations: rounds.len() });
        }
        let positive_count = lambdas.iter().filter(|&&v| v > 0.0).count();
        if positive_count == 0 {
            return Err(TomoError::DegenerateInput("no positive eigenvalues".into()));
        }
        let removed: f64 = lambdas.iter().filter(|&&v| v < 0.0).sum();
        let share = removed / positive_count as f64;
        let mut redistributed = 0.0;
        for v in lambdas.iter_mut() {
            if *v > 0.0 {
                *v += share;
                redistributed += share;
            } else {
                *v = 0.0;
            }
        }
        rounds.push(CorrectionRound { removed, redistributed, positive_count });
    }
    let order = (0..lambdas.len()).collect();
    Ok(SpectralCorrection { eigenvalues: lambdas, order, rounds })
}

pub fn sgs_correct(s: &Spectrum) -> Result<CorrectionReport> {
    let start = Instant::now();
    let corrected = sgs_eigenvalues(&s.eigenvalues)?;
    let output = corrected.apply(s);
    Ok(CorrectionReport {
        output,
        iterations: corrected.iterations(),
        cost_before: None,
        cost_after: None,
        wall_time: start.elapsed(),
        converged: true,
        cost_trace: Vec::new(),
    })
}
