//! Eigenvalue optimization: SGS-style nullification with the removed weight
//! distributed according to a fitted odd power series.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_unit_sum, CorrectionReport, CorrectionRound, SpectralCorrection, MAX_SPECTRAL_ROUNDS};
use crate::density::Spectrum;
use crate::error::{Result, TomoError};

/// The shipped weighting curve, `{"c": [c1, ..., c6]}`.
pub const DEFAULT_FIT_CURVE_JSON: &str = include_str!("../../data/eo_fit_curve.json");

/// `F(x) = sum_k c_k (x - 1)^(2k - 1)` on `[0, 2]`.
///
/// Only odd powers of `x - 1` appear, so `F(1) = 0` and `F` is odd about
/// `x = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCurve {
    #[serde(rename = "c")]
    pub coefficients: Vec<f64>,
}

impl Default for FitCurve {
    fn default() -> Self {
        Self::from_json(DEFAULT_FIT_CURVE_JSON).expect("shipped fit curve parses")
    }
}

impl FitCurve {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn terms(&self) -> usize {
        self.coefficients.len()
    }

    /// Evaluates at offset `u = x - 1`. `value_at_offset(-u)` is exactly
    /// `-value_at_offset(u)`.
    pub fn value_at_offset(&self, u: f64) -> f64 {
        let u2 = u * u;
        let mut power = u;
        let mut acc = 0.0;
        for c in &self.coefficients {
            acc += c * power;
            power *= u2;
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let curve: Self = serde_json::from_str(text)?;
        if curve.coefficients.is_empty() || curve.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(TomoError::Schema { field: "c".into(), message: "expected a non-empty list of finite numbers".into() });
        }
        Ok(curve)
    }
}

pub fn eval_fit(f: &FitCurve, x: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&x) {
        return Err(TomoError::DomainError { x });
    }
    Ok(f.value_at_offset(x - 1.0))
}

/// Redistributes negative eigenvalues with weights `F((i-1)/(n_+ - 0.5))`.
///
/// Each round zeroes every non-positive eigenvalue, computes the signed sum
/// `a` of the negatives, keeps the leading eigenvalue fixed, and adds
/// `a / N_f * F((i-1)/(n_+ - 0.5))` to eigenvalue `i` in `2..=n_+`, where
/// `N_f` is the sum of those weights. The corrections therefore sum to `a`
/// and the trace stays one. Rounds repeat on the corrected values while any
/// are negative; between rounds the kept eigenvalues are re-sorted (the
/// leading one stays in place). With a single positive eigenvalue the result
/// is `(1, 0, ..., 0)`.
pub fn eo_eigenvalues(values: &[f64], curve: &FitCurve) -> Result<SpectralCorrection> {
    check_unit_sum(values)?;
    let dim = values.len();
    let mut lambdas = values.to_vec();
    let mut order: Vec<usize> = (0..dim).collect();
    let mut rounds = Vec::new();

    while lambdas.iter().any(|&v| v < 0.0) {
        if rounds.len() == MAX_SPECTRAL_ROUNDS {
            return Err(TomoError::NoConvergence { iterations: rounds.len() });
        }
        let positive_count = lambdas.iter().filter(|&&v| v > 0.0).count();
        let removed: f64 = lambdas.iter().filter(|&&v| v < 0.0).sum();
        if positive_count == 0 {
            return Err(TomoError::DegenerateInput("no positive eigenvalues".into()));
        }
        if positive_count == 1 {
            let redistributed = 1.0 - lambdas[0];
            lambdas.iter_mut().for_each(|v| *v = 0.0);
            lambdas[0] = 1.0;
            rounds.push(CorrectionRound { removed, redistributed, positive_count });
            break;
        }

        let denominator = positive_count as f64 - 0.5;
        let weights: Vec<f64> = (2..=positive_count)
            .map(|i| curve.value_at_offset((i - 1) as f64 / denominator - 1.0))
            .collect();
        let normalization: f64 = weights.iter().sum();
        if normalization == 0.0 || !normalization.is_finite() {
            return Err(TomoError::DegenerateInput(format!(
                "fit curve weights sum to {normalization} for {positive_count} positive eigenvalues"
            )));
        }
        let scale = removed / normalization;
        let mut redistributed = 0.0;
        for (k, w) in weights.iter().enumerate() {
            let correction = scale * w;
            lambdas[k + 1] += correction;
            redistributed += correction;
        }
        lambdas[positive_count..].iter_mut().for_each(|v| *v = 0.0);
        rounds.push(CorrectionRound { removed, redistributed, positive_count });

        // Re-sort everything behind the pinned leading eigenvalue.
        let mut tail: Vec<(f64, usize)> = lambdas[1..].iter().copied().zip(order[1..].iter().copied()).collect();
        tail.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (k, (v, idx)) in tail.into_iter().enumerate() {
            lambdas[k + 1] = v;
            order[k + 1] = idx;
        }
    }

    Ok(SpectralCorrection { eigenvalues: lambdas, order, rounds })
}

pub fn eo_correct(s: &Spectrum, f: &FitCurve) -> Result<CorrectionReport> {
    let start = Instant::now();
    let corrected = eo_eigenvalues(&s.eigenvalues, f)?;
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
