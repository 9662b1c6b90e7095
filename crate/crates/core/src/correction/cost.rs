use crate::density::DensityMatrix;
use crate::measurement::CountRecord;
use crate::tolerance;

/// `sum_j (p_j - m_j)^2 / (2 p_j)` with `p_j = <m_j|rho|m_j>` floored at
/// `1e-12` in the denominator.
pub fn loglike_cost(candidate: &DensityMatrix, cr: &CountRecord) -> f64 {
    let predicted = cr.projectors.expectations(candidate.matrix());
    loglike_cost_from_probabilities(&predicted, &cr.probabilities)
}

pub fn loglike_cost_from_probabilities(predicted: &[f64], observed: &[f64]) -> f64 {
    predicted
        .iter()
        .zip(observed)
        .map(|(&p, &m)| (p - m).powi(2) / (2.0 * p.max(tolerance::PROBABILITY_FLOOR)))
        .sum()
}

/// `sum_j (p_j - m_j)^2`.
pub fn quadratic_cost(candidate: &DensityMatrix, cr: &CountRecord) -> f64 {
    let predicted = cr.projectors.expectations(candidate.matrix());
    predicted.iter().zip(&cr.probabilities).map(|(p, m)| (p - m).powi(2)).sum()
}
