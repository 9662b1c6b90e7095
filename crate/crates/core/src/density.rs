//! Dense density matrices, their spectra, and the state metrics built on them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::tolerance::{self, Tolerances};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// A `2^n x 2^n` Hermitian matrix over `n` qubits.
///
/// Positivity is not enforced: linear reconstructions are routinely
/// non-physical, and the correction algorithms exist to repair them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityMatrixJson", try_from = "DensityMatrixJson")]
pub struct DensityMatrix {
    n: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Wraps `data`, checking shape and Hermiticity. The stored matrix is
    /// symmetrized so that it is exactly Hermitian.
    pub fn new(n: usize, data: CMatrix) -> Result<Self> {
        Self::with_tolerance(n, data, tolerance::HERMITIAN)
    }

    pub fn with_tolerance(n: usize, data: CMatrix, hermitian_tol: f64) -> Result<Self> {
        let dim = 1usize << n;
        if n == 0 {
            return Err(TomoError::DimensionMismatch { expected: 2, actual: 1 });
        }
        if data.nrows() != dim || data.ncols() != dim {
            return Err(TomoError::DimensionMismatch { expected: dim, actual: data.nrows() });
        }
        let deviation = hermitian_deviation(&data);
        if !(deviation <= hermitian_tol) {
            return Err(TomoError::NonHermitian { deviation });
        }
        Ok(Self { n, data: hermitize(&data) })
    }

    /// Infers the qubit count from the matrix size.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        let dim = data.nrows();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(TomoError::DimensionMismatch { expected: dim.next_power_of_two().max(2), actual: dim });
        }
        Self::new(dim.trailing_zeros() as usize, data)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        let data = CMatrix::from_diagonal_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0));
        Self { n, data }
    }

    pub fn diagonal(n: usize, entries: &[f64]) -> Result<Self> {
        let dim = 1usize << n;
        if entries.len() != dim {
            return Err(TomoError::DimensionMismatch { expected: dim, actual: entries.len() });
        }
        let diag = CVector::from_iterator(dim, entries.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(Self { n, data: CMatrix::from_diagonal(&diag) })
    }

    /// `|psi><psi|` for the normalized amplitude vector `psi`.
    pub fn pure(amplitudes: &CVector) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(TomoError::DimensionMismatch { expected: dim.next_power_of_two().max(2), actual: dim });
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(TomoError::DegenerateInput("zero state vector".into()));
        }
        let psi = amplitudes / Complex64::new(norm, 0.0);
        let data = &psi * psi.adjoint();
        Ok(Self { n: dim.trailing_zeros() as usize, data: hermitize(&data) })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn is_normalized(&self) -> bool {
        let tr = self.trace();
        (tr.re - 1.0).abs() <= tolerance::TRACE && tr.im.abs() < 1e-12
    }

    pub fn min_eigenvalue(&self) -> f64 {
        symmetric_eigen(&self.data).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// All eigenvalues at or above `-1e-10`.
    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -tolerance::PHYSICAL
    }

    /// Returns `self / Tr(self)`.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if !(tr.abs() > f64::EPSILON) {
            return Err(TomoError::DegenerateInput("trace is zero".into()));
        }
        Ok(Self { n: self.n, data: self.data.map(|z| z / tr) })
    }

    /// `U rho U^H`.
    pub fn conjugate_by(&self, unitary: &CMatrix) -> Result<Self> {
        if unitary.nrows() != self.dim() || unitary.ncols() != self.dim() {
            return Err(TomoError::DimensionMismatch { expected: self.dim(), actual: unitary.nrows() });
        }
        let data = unitary * &self.data * unitary.adjoint();
        Ok(Self { n: self.n, data: hermitize(&data) })
    }

    /// Entrywise max of `|self - other|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.data - &other.data).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Wire format: `{"n": int, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMatrixJson {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityMatrixJson {
    fn from(m: DensityMatrix) -> Self {
        let dim = m.dim();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..dim).map(|i| (0..dim).map(|j| f(&m.data[(i, j)])).collect()).collect()
        };
        Self { n: m.n, re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = TomoError;

    fn try_from(json: DensityMatrixJson) -> Result<Self> {
        if json.n == 0 || json.n > 16 {
            return Err(TomoError::Schema { field: "n".into(), message: format!("unsupported qubit count {}", json.n) });
        }
        let dim = 1usize << json.n;
        for (name, part) in [("re", &json.re), ("im", &json.im)] {
            if part.len() != dim {
                return Err(TomoError::Schema {
                    field: name.into(),
                    message: format!("expected {dim} rows, found {}", part.len()),
                });
            }
            if let Some((i, row)) = part.iter().enumerate().find(|(_, row)| row.len() != dim) {
                return Err(TomoError::Schema {
                    field: format!("{name}[{i}]"),
                    message: format!("expected {dim} columns, found {}", row.len()),
                });
            }
        }
        let data = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(json.re[i][j], json.im[i][j]));
        DensityMatrix::new(json.n, data)
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Number of strictly positive eigenvalues.
    pub fn positive_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same eigenvectors, new eigenvalues.
    pub fn with_eigenvalues(&self, eigenvalues: Vec<f64>) -> Self {
        assert_eq!(eigenvalues.len(), self.dim());
        Self { eigenvalues, eigenvectors: self.eigenvectors.clone() }
    }

    pub fn eigenvector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }
}

/// Eigendecomposition of a Hermitian density matrix, sorted descending.
///
/// Ties keep the order produced by the underlying solver. Diagonal inputs
/// take an exact path: eigenvalues are the diagonal and eigenvectors the
/// standard basis.
pub fn eigendecompose(m: &DensityMatrix) -> Result<Spectrum> {
    eigendecompose_matrix(m.matrix(), tolerance::HERMITIAN)
}

pub fn eigendecompose_with(m: &DensityMatrix, tol: &Tolerances) -> Result<Spectrum> {
    eigendecompose_matrix(m.matrix(), tol.hermitian)
}

pub fn eigendecompose_matrix(m: &CMatrix, hermitian_tol: f64) -> Result<Spectrum> {
    let dim = m.nrows();
    if m.ncols() != dim {
        return Err(TomoError::DimensionMismatch { expected: dim, actual: m.ncols() });
    }
    let deviation = hermitian_deviation(m);
    if !(deviation <= hermitian_tol) {
        return Err(TomoError::NonHermitian { deviation });
    }

    let (values, vectors) = if is_diagonal(m) {
        ((0..dim).map(|i| m[(i, i)].re).collect::<Vec<_>>(), CMatrix::identity(dim, dim))
    } else {
        let eig = symmetric_eigen(m);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..dim).collect();
    // `sort_by` is stable, so equal eigenvalues keep their solver order.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| vectors[(r, order[c])]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// `sum_i lambda_i |v_i><v_i|`.
pub fn from_spectrum(s: &Spectrum) -> DensityMatrix {
    let data = weighted_outer(&s.eigenvectors, &s.eigenvalues);
    DensityMatrix { n: s.qubits(), data }
}

/// `V diag(w) V^H`, symmetrized. Columns with zero weight are skipped, so the
/// cost is `d^2` per nonzero weight.
pub(crate) fn weighted_outer(vectors: &CMatrix, weights: &[f64]) -> CMatrix {
    let kept: Vec<usize> = weights.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(i, _)| i).collect();
    let basis = vectors.select_columns(&kept);
    let mut scaled = basis.clone();
    for (mut col, &i) in scaled.column_iter_mut().zip(&kept) {
        col *= Complex64::new(weights[i], 0.0);
    }
    hermitize(&(scaled * basis.adjoint()))
}

/// Uhlmann fidelity `Tr^2 sqrt(sqrt(a) b sqrt(a))`, clamped to `[0, 1]`.
///
/// Evaluated as the squared nuclear norm of `sqrt(a) sqrt(b)`, which has the
/// same value and avoids taking square roots of round-off sized eigenvalues.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    fidelity_with(a, b, &Tolerances::default())
}

pub fn fidelity_with(a: &DensityMatrix, b: &DensityMatrix, tol: &Tolerances) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(TomoError::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    let sqrt_a = psd_sqrt(a, tol)?;
    let sqrt_b = psd_sqrt(b, tol)?;
    let product = sqrt_a * sqrt_b;
    let nuclear: f64 = product.singular_values().iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

pub fn infidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok(1.0 - fidelity(a, b)?)
}

/// `Tr(rho^2)`.
pub fn purity(m: &DensityMatrix) -> f64 {
    m.matrix().iter().map(|z| z.norm_sqr()).sum()
}

fn psd_sqrt(m: &DensityMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let s = eigendecompose_matrix(m.matrix(), tol.hermitian)?;
    let min = s.min();
    if min < -tol.non_physical_hard {
        return Err(TomoError::NonPhysicalInput { min_eigenvalue: min });
    }
    let roots: Vec<f64> = s.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(weighted_outer(&s.eigenvectors, &roots))
}

fn symmetric_eigen(m: &CMatrix) -> SymmetricEigen<Complex64, nalgebra::Dyn> {
    SymmetricEigen::new(m.clone())
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let dim = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

fn is_diagonal(m: &CMatrix) -> bool {
    let dim = m.nrows();
    (0..dim).all(|i| (0..dim).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}
