//! Direct likelihood maximization over `rho = T^dag T / Tr(T^dag T)` with `T`
//! lower triangular.

use std::time::Instant;

use nalgebra::Cholesky;
use num_complex::Complex64;

use super::cost::{loglike_cost, loglike_cost_from_probabilities};
use super::CorrectionReport;
use crate::density::{CMatrix, DensityMatrix};
use crate::error::{Result, TomoError};
use crate::measurement::CountRecord;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::tolerance;

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub simplex: NelderMeadOptions,
    /// Weight of `I/d` mixed into the starting state so that its Cholesky
    /// factor exists. Raised by factors of ten if the factorization fails.
    pub start_mixing: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            simplex: NelderMeadOptions { initial_step: 0.05, ftol_abs: 1e-10, xtol_abs: 1e-10, max_evals: 100_000, restarts: 6 },
            start_mixing: 1e-10,
        }
    }
}

/// Number of real parameters of a lower-triangular `dim x dim` complex
/// matrix with real diagonal: `dim^2`.
pub(crate) fn parameter_count(dim: usize) -> usize {
    dim * dim
}

/// Row-major over the lower triangle: diagonal entries take one real
/// parameter, off-diagonal entries two (real, imaginary).
pub(crate) fn unpack_triangular(dim: usize, t: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    let mut k = 0;
    for r in 0..dim {
        for c in 0..r {
            m[(r, c)] = Complex64::new(t[k], t[k + 1]);
            k += 2;
        }
        m[(r, r)] = Complex64::new(t[k], 0.0);
        k += 1;
    }
    m
}

pub(crate) fn pack_triangular(m: &CMatrix) -> Vec<f64> {
    let dim = m.nrows();
    let mut t = Vec::with_capacity(parameter_count(dim));
    for r in 0..dim {
        for c in 0..r {
            t.push(m[(r, c)].re);
            t.push(m[(r, c)].im);
        }
        t.push(m[(r, r)].re);
    }
    t
}

/// Lower-triangular `T` with `T^dag T = rho`.
///
/// With `J` the exchange matrix and `J rho J = L L^dag`, `T = J L^dag J`.
fn triangular_factor(rho: &CMatrix) -> Option<CMatrix> {
    let dim = rho.nrows();
    let flipped = CMatrix::from_fn(dim, dim, |r, c| rho[(dim - 1 - r, dim - 1 - c)]);
    let l = Cholesky::new(flipped)?.unpack();
    let la = l.adjoint();
    Some(CMatrix::from_fn(dim, dim, |r, c| la[(dim - 1 - r, dim - 1 - c)]))
}

fn state_from_factor(n: usize, t: &CMatrix) -> Result<DensityMatrix> {
    let gram = t.adjoint() * t;
    let trace = gram.trace().re;
    DensityMatrix::new(n, gram.map(|z| z / trace))
}

pub fn mle_correct(cr: &CountRecord, init: &DensityMatrix) -> Result<CorrectionReport> {
    mle_correct_with(cr, init, &MleOptions::default())
}

/// Minimizes the log-likelihood cost starting from `init`.
///
/// The result never has a higher cost than `init`. When the evaluation
/// budget runs out the best point found is returned with `converged` false.
pub fn mle_correct_with(cr: &CountRecord, init: &DensityMatrix, options: &MleOptions) -> Result<CorrectionReport> {
    let start = Instant::now();
    let n = cr.qubits();
    if init.qubits() != n {
        return Err(TomoError::DimensionMismatch { expected: n, actual: init.qubits() });
    }
    let min_eigenvalue = init.min_eigenvalue();
    if min_eigenvalue < -tolerance::PHYSICAL {
        return Err(TomoError::NonPhysicalInput { min_eigenvalue });
    }
    let dim = init.dim();
    let cost_before = loglike_cost(init, cr);

    let identity = CMatrix::identity(dim, dim);
    let mut mixing = options.start_mixing;
    let factor = loop {
        let shifted = init.matrix().map(|z| z * (1.0 - mixing)) + identity.map(|z| z * (mixing / dim as f64));
        if let Some(t) = triangular_factor(&shifted) {
            break t;
        }
        mixing *= 10.0;
        if mixing > 1e-3 {
            return Err(TomoError::DegenerateInput("starting state has no usable Cholesky factor".into()));
        }
    };

    let columns = cr.projectors.columns();
    let observed = &cr.probabilities;
    let mut predicted = vec![0.0; columns.ncols()];
    let objective = |x: &[f64]| {
        let t = unpack_triangular(dim, x);
        let norm: f64 = x.iter().map(|v| v * v).sum();
        if norm <= 0.0 || !norm.is_finite() {
            return f64::INFINITY;
        }
        let image = t * columns;
        for (p, col) in predicted.iter_mut().zip(image.column_iter()) {
            *p = col.iter().map(|z| z.norm_sqr()).sum::<f64>() / norm;
        }
        loglike_cost_from_probabilities(&predicted, observed)
    };
    let found = nelder_mead(objective, &pack_triangular(&factor), &options.simplex);

    let candidate = state_from_factor(n, &unpack_triangular(dim, &found.x))?;
    let candidate_cost = loglike_cost(&candidate, cr);
    let (output, cost_after) = if candidate_cost <= cost_before { (candidate, candidate_cost) } else { (init.clone(), cost_before) };

    Ok(CorrectionReport {
        output,
        iterations: found.iterations,
        cost_before: Some(cost_before),
        cost_after: Some(cost_after),
        wall_time: start.elapsed(),
        converged: found.converged,
        cost_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::density::{eigendecompose, infidelity};
    use crate::linear::linear_reconstruct;
    use crate::measurement::{cube_projectors, simulate_counts, NoiseModel};
    use crate::states::{mixed_state, rank_deficient_state, StateRecipe};

    #[test]
    fn packing_round_trip() {
        let t = vec![0.3, 0.1, -0.2, 0.7, 0.5, 0.4, -0.1, 0.2, 0.9];
        let m = unpack_triangular(3, &t);
        assert_eq!(m[(0, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(m[(1, 0)], Complex64::new(0.1, -0.2));
        assert_eq!(pack_triangular(&m), t);
        assert_eq!(parameter_count(4), 16);
    }

    #[test]
    fn triangular_factor_reproduces_state() {
        let state = mixed_state(&StateRecipe::new(2, 0.6, 11)).unwrap();
        let t = triangular_factor(state.matrix()).unwrap();
        for r in 0..4 {
            for c in r + 1..4 {
                assert_eq!(t[(r, c)], Complex64::new(0.0, 0.0));
            }
        }
        let back = t.adjoint() * &t;
        assert!((back - state.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn noiseless_data_recovers_state() {
        let ps = Arc::new(cube_projectors(2));
        let truth = mixed_state(&StateRecipe::new(2, 0.8, 21)).unwrap();
        let cr = CountRecord::exact(&truth, ps, 1000).unwrap();
        let report = mle_correct(&cr, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(infidelity(&report.output, &truth).unwrap() < 1e-6);
        assert!(report.cost_after.unwrap() <= report.cost_before.unwrap());
    }

    #[test]
    fn improves_on_spectral_start() {
        let ps = Arc::new(cube_projectors(2));
        let truth = rank_deficient_state(&StateRecipe::new(2, 0.9, 3).with_zero_fraction(0.5)).unwrap();
        let cr = simulate_counts(&truth, &ps, 500, 9, NoiseModel::Gaussian).unwrap();
        let s = eigendecompose(&linear_reconstruct(&cr).unwrap()).unwrap();
        let init = crate::correction::sgs_correct(&s).unwrap().output;
        let report = mle_correct(&cr, &init).unwrap();
        assert!(report.output.is_physical());
        assert!((report.output.trace().re - 1.0).abs() < 1e-9);
        assert!(report.cost_after.unwrap() <= report.cost_before.unwrap());
    }

    #[test]
    fn rejects_non_physical_start() {
        let ps = Arc::new(cube_projectors(1));
        let truth = DensityMatrix::maximally_mixed(1);
        let cr = CountRecord::exact(&truth, ps, 10).unwrap();
        let bad = DensityMatrix::diagonal(1, &[1.1, -0.1]).unwrap();
        assert!(matches!(mle_correct(&cr, &bad), Err(TomoError::NonPhysicalInput { .. })));
    }
}
