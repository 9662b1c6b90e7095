//! Fixed-point likelihood iteration `rho <- N[R rho R]`.

use std::time::Instant;

use num_complex::Complex64;

use super::cost::loglike_cost_from_probabilities;
use super::CorrectionReport;
use crate::density::{hermitize, CMatrix, DensityMatrix};
use crate::error::{Result, TomoError};
use crate::measurement::CountRecord;
use crate::tolerance;

#[derive(Debug, Clone)]
pub struct ImleOptions {
    pub max_iterations: usize,
    /// Stop once no entry of `rho` moves by more than this.
    pub step_tolerance: f64,
    /// Keep the log-likelihood cost of every iterate in the report.
    pub record_costs: bool,
}

impl Default for ImleOptions {
    fn default() -> Self {
        Self { max_iterations: 10_000, step_tolerance: 1e-10, record_costs: false }
    }
}

pub fn imle_correct(cr: &CountRecord, init: &DensityMatrix) -> Result<CorrectionReport> {
    imle_correct_with(cr, init, &ImleOptions::default())
}

/// Iterates `rho <- R rho R / Tr(R rho R)` with
/// `R = sum_j (m_j / <m_j|rho|m_j>) |m_j><m_j|`.
///
/// Eigen-directions where `init` vanishes stay empty, so `init` should have
/// full rank; the maximally mixed state is the usual choice. If the
/// iteration limit is reached the lowest-cost iterate is returned with
/// `converged` false.
pub fn imle_correct_with(cr: &CountRecord, init: &DensityMatrix, options: &ImleOptions) -> Result<CorrectionReport> {
    let start = Instant::now();
    let n = cr.qubits();
    if init.qubits() != n {
        return Err(TomoError::DimensionMismatch { expected: n, actual: init.qubits() });
    }
    let min_eigenvalue = init.min_eigenvalue();
    if min_eigenvalue < -tolerance::PHYSICAL {
        return Err(TomoError::NonPhysicalInput { min_eigenvalue });
    }

    let columns = cr.projectors.columns();
    let adjoint = columns.adjoint();
    let observed = &cr.probabilities;
    let mut rho = init.matrix().clone();
    let mut trace = Vec::new();
    let mut best: Option<(f64, CMatrix)> = None;
    let mut cost_before = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_cost;

    loop {
        let predicted = cr.projectors.expectations(&rho);
        let cost = loglike_cost_from_probabilities(&predicted, observed);
        cost_before.get_or_insert(cost);
        last_cost = cost;
        if options.record_costs {
            trace.push(cost);
        }
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, rho.clone()));
        }
        if converged || iterations == options.max_iterations {
            break;
        }

        let mut weighted = columns.clone();
        for (mut col, (&p, &m)) in weighted.column_iter_mut().zip(predicted.iter().zip(observed)) {
            col *= Complex64::new(m / p.max(tolerance::PROBABILITY_FLOOR), 0.0);
        }
        let r = weighted * &adjoint;
        let next = &r * &rho * &r;
        let norm = next.trace().re;
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(TomoError::DegenerateInput("iteration collapsed to a zero matrix".into()));
        }
        let next = hermitize(&next.map(|z| z / norm));
        let change = (&next - &rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
        rho = next;
        iterations += 1;
        converged = change < options.step_tolerance;
    }

    let (cost_after, output) = if converged { (last_cost, rho) } else { best.expect("at least one iterate") };

    Ok(CorrectionReport {
        output: DensityMatrix::new(n, output)?,
        iterations,
        cost_before,
        cost_after: Some(cost_after),
        wall_time: start.elapsed(),
        converged,
        cost_trace: trace,
    })
}
