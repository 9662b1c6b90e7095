//! Linear inversion of measured frequencies onto the Pauli operator basis.
//!
//! The estimate is `rho = (I + sum_a s_a P_a) / 2^n` with the identity
//! coefficient pinned to one, so the trace is exactly one. The coefficients
//! minimize `sum_j (<m_j|rho|m_j> - m_j)^2`. For product (cube) settings the
//! normal equations are diagonal and each `s_a` is the average of its parity
//! estimates over every compatible setting; other projector sets go through a
//! cached pseudo-inverse of the design matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::density::{CMatrix, DensityMatrix};
use crate::error::{Result, TomoError};
use crate::measurement::{CountRecord, ProjectorSet};
use crate::pauli::{Pauli, PauliString};

/// Pseudo-inverse of the design matrix, computed once per projector set.
#[derive(Debug)]
pub(crate) struct DesignCache {
    pinv: Option<DMatrix<f64>>,
    rank: usize,
    required: usize,
}

pub fn linear_reconstruct(cr: &CountRecord) -> Result<DensityMatrix> {
    reconstruct_from_probabilities(&cr.projectors, &cr.probabilities)
}

pub fn reconstruct_from_probabilities(ps: &ProjectorSet, probabilities: &[f64]) -> Result<DensityMatrix> {
    if ps.is_product_basis() {
        let coefficients = product_basis_coefficients(ps, probabilities)?;
        Ok(from_pauli_coefficients(ps.qubits(), &coefficients))
    } else {
        least_squares_reconstruct(ps, probabilities)
    }
}

/// General least-squares path, valid for any informationally complete set.
pub fn least_squares_reconstruct(ps: &ProjectorSet, probabilities: &[f64]) -> Result<DensityMatrix> {
    check_len(ps, probabilities)?;
    let cache = ps.design.get_or_init(|| build_design_cache(ps));
    let Some(pinv) = &cache.pinv else {
        return Err(TomoError::SingularDesign { rank: cache.rank, required: cache.required });
    };
    let dim = ps.dim() as f64;
    let rhs = DVector::from_iterator(probabilities.len(), probabilities.iter().map(|m| m - 1.0 / dim));
    let s = pinv * rhs;
    let mut coefficients = Vec::with_capacity(s.len() + 1);
    coefficients.push(1.0);
    coefficients.extend(s.iter());
    Ok(from_pauli_coefficients(ps.qubits(), &coefficients))
}

/// Pauli coefficients `s_a = Tr(rho P_a)` estimated from product settings,
/// indexed by [`PauliString::index`] (`s_0 = 1`).
pub fn product_basis_coefficients(ps: &ProjectorSet, probabilities: &[f64]) -> Result<Vec<f64>> {
    check_len(ps, probabilities)?;
    let n = ps.qubits();
    let count = 1usize << (2 * n);
    let mut sums = vec![0.0; count];
    let mut hits = vec![0usize; count];
    for setting in ps.settings() {
        let bases = setting.bases.as_ref().ok_or_else(|| TomoError::Schema {
            field: setting.label.clone(),
            message: "not a product setting".into(),
        })?;
        let probs = &probabilities[setting.range.clone()];
        // Each qubit subset selects the Pauli string that agrees with the
        // setting on the subset and is identity elsewhere.
        for mask in 0..1usize << n {
            let index = (0..n).fold(0usize, |acc, q| {
                let bit = (mask >> (n - 1 - q)) & 1;
                (acc << 2) | if bit == 1 { bases[q].index() } else { Pauli::I.index() }
            });
            let parity_sum: f64 = probs
                .iter()
                .enumerate()
                .map(|(o, p)| if (o & mask).count_ones() % 2 == 0 { *p } else { -*p })
                .sum();
            sums[index] += parity_sum;
            hits[index] += 1;
        }
    }
    let covered = hits.iter().filter(|&&h| h > 0).count();
    if covered < count {
        return Err(TomoError::SingularDesign { rank: covered - 1, required: count - 1 });
    }
    let mut coefficients: Vec<f64> = sums.iter().zip(&hits).map(|(s, &h)| s / h as f64).collect();
    coefficients[0] = 1.0;
    Ok(coefficients)
}

/// `(sum_a s_a P_a) / 2^n`.
pub fn from_pauli_coefficients(n: usize, coefficients: &[f64]) -> DensityMatrix {
    let dim = 1usize << n;
    let scale = 1.0 / dim as f64;
    let mut m = CMatrix::zeros(dim, dim);
    for (a, &s) in coefficients.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let p = PauliString::from_index(n, a);
        for k in 0..dim {
            let (row, phase) = p.apply_basis(k);
            m[(row, k)] += phase * Complex64::new(s * scale, 0.0);
        }
    }
    DensityMatrix::new(n, m).expect("real Pauli combinations are Hermitian")
}

fn check_len(ps: &ProjectorSet, probabilities: &[f64]) -> Result<()> {
    if probabilities.len() != ps.len() {
        return Err(TomoError::DimensionMismatch { expected: ps.len(), actual: probabilities.len() });
    }
    Ok(())
}

fn build_design_cache(ps: &ProjectorSet) -> DesignCache {
    let n = ps.qubits();
    let dim = ps.dim() as f64;
    let unknowns = (1usize << (2 * n)) - 1;
    let strings: Vec<PauliString> = (1..=unknowns).map(|a| PauliString::from_index(n, a)).collect();
    let design = DMatrix::from_fn(ps.len(), unknowns, |j, a| {
        strings[a].expectation_in(ps.projectors()[j].vector.as_slice()) / dim
    });
    let svd = design.svd(true, true);
    let max = svd.singular_values.max();
    let cutoff = 1e-10 * max.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let pinv = if rank == unknowns { svd.pseudo_inverse(cutoff).ok() } else { None };
    DesignCache { pinv, rank, required: unknowns }
}
