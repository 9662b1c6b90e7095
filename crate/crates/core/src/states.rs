//! Random pure, mixed and rank-deficient test states.
//!
//! The mixed family is
//!
//! ```text
//! rho = p * rho_pure + (1 - p)/3 * (2 * I/d + E)
//! E   = eps * (U rho_pure U^H - rho_pure)
//! ```
//!
//! renormalized to unit trace, where `U` rotates every qubit by angle `eps`
//! about an independent random axis.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{eigendecompose, from_spectrum, purity, CMatrix, CVector, DensityMatrix};
use crate::error::{Result, TomoError};
use crate::rng::{rng_from_seed, TomoRng};

/// Largest qubit count accepted by the generators.
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRecipe {
    pub n: usize,
    /// Weight `p` of the pure component, in `(0, 1]`.
    pub purity_param: f64,
    /// Fraction of the spectrum forced to zero, in `[0, 1)`.
    pub zero_fraction: f64,
    pub rotation_strength: f64,
    pub seed: u64,
}

impl StateRecipe {
    pub fn new(n: usize, purity_param: f64, seed: u64) -> Self {
        Self { n, purity_param, zero_fraction: 0.0, rotation_strength: 0.0, seed }
    }

    pub fn with_zero_fraction(mut self, zero_fraction: f64) -> Self {
        self.zero_fraction = zero_fraction;
        self
    }

    pub fn with_rotation(mut self, rotation_strength: f64) -> Self {
        self.rotation_strength = rotation_strength;
        self
    }

    pub fn with_purity_param(mut self, purity_param: f64) -> Self {
        self.purity_param = purity_param;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_QUBITS {
            return Err(TomoError::InvalidRecipe(format!("qubit count {} outside 1..={MAX_QUBITS}", self.n)));
        }
        if !(self.purity_param > 0.0 && self.purity_param <= 1.0) {
            return Err(TomoError::InvalidRecipe(format!("purity_param {} outside (0, 1]", self.purity_param)));
        }
        if !(0.0..1.0).contains(&self.zero_fraction) {
            return Err(TomoError::InvalidRecipe(format!("zero_fraction {} outside [0, 1)", self.zero_fraction)));
        }
        if !(self.rotation_strength >= 0.0 && self.rotation_strength.is_finite()) {
            return Err(TomoError::InvalidRecipe(format!(
                "rotation_strength {} must be finite and non-negative",
                self.rotation_strength
            )));
        }
        Ok(())
    }

    /// Number of eigenvalues the rank-deficient generator sets to zero.
    pub fn zeroed_count(&self) -> usize {
        ((self.zero_fraction * (1usize << self.n) as f64).floor() as usize).min((1 << self.n) - 1)
    }
}

/// Haar-random normalized ket from i.i.d. complex Gaussian amplitudes.
pub fn haar_ket(n: usize, rng: &mut TomoRng) -> CVector {
    let dim = 1usize << n;
    let v = DVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

pub fn random_pure_state(n: usize, seed: u64) -> Result<DensityMatrix> {
    if n == 0 || n > MAX_QUBITS {
        return Err(TomoError::InvalidRecipe(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
    }
    let mut rng = rng_from_seed(seed);
    DensityMatrix::pure(&haar_ket(n, &mut rng))
}

/// Product of single-qubit rotations by `angle` about random axes.
pub fn random_rotation(n: usize, angle: f64, rng: &mut TomoRng) -> CMatrix {
    let (s, c) = (angle / 2.0).sin_cos();
    let mut u = CMatrix::identity(1, 1);
    for _ in 0..n {
        let mut axis = [0.0f64; 3];
        loop {
            for a in axis.iter_mut() {
                *a = rng.sample(StandardNormal);
            }
            let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-12 {
                axis.iter_mut().for_each(|a| *a /= norm);
                break;
            }
        }
        let [x, y, z] = axis;
        // cos(t/2) I - i sin(t/2) (x X + y Y + z Z)
        let single = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, -s * z),
                Complex64::new(-s * y, -s * x),
                Complex64::new(s * y, -s * x),
                Complex64::new(c, s * z),
            ],
        );
        u = u.kronecker(&single);
    }
    u
}

pub fn mixed_state(recipe: &StateRecipe) -> Result<DensityMatrix> {
    recipe.validate()?;
    let n = recipe.n;
    let dim = 1usize << n;
    let mut rng = rng_from_seed(recipe.seed);
    let pure = DensityMatrix::pure(&haar_ket(n, &mut rng))?;
    let p = recipe.purity_param;
    if p == 1.0 {
        return Ok(pure);
    }

    let eps = recipe.rotation_strength;
    let error = if eps > 0.0 {
        let u = random_rotation(n, eps, &mut rng);
        let rotated = pure.conjugate_by(&u)?;
        (rotated.matrix() - pure.matrix()) * Complex64::new(eps, 0.0)
    } else {
        CMatrix::zeros(dim, dim)
    };

    let identity = CMatrix::identity(dim, dim) * Complex64::new(2.0 / dim as f64, 0.0);
    let mixed = pure.matrix() * Complex64::new(p, 0.0) + (identity + error) * Complex64::new((1.0 - p) / 3.0, 0.0);
    let state = DensityMatrix::new(n, mixed)?.normalized()?;

    let min_eigenvalue = state.min_eigenvalue();
    if min_eigenvalue < -1e-12 {
        return Err(TomoError::NonPhysicalRecipe { min_eigenvalue });
    }
    Ok(state)
}

/// The mixed state with its smallest `floor(zero_fraction * 2^n)` eigenvalues
/// set to zero, renormalized.
pub fn rank_deficient_state(recipe: &StateRecipe) -> Result<DensityMatrix> {
    let mixed = mixed_state(recipe)?;
    let zeroed = recipe.zeroed_count();
    if zeroed == 0 {
        return Ok(mixed);
    }
    let spectrum = eigendecompose(&mixed)?;
    let dim = spectrum.dim();
    let mut values: Vec<f64> = spectrum.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    values[dim - zeroed..].iter_mut().for_each(|v| *v = 0.0);
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    Ok(from_spectrum(&spectrum.with_eigenvalues(values)))
}

/// Finds the `purity_param` for which [`rank_deficient_state`] has purity
/// `target`, by bisection. Other recipe fields are kept.
pub fn solve_purity_param(template: &StateRecipe, target: f64) -> Result<StateRecipe> {
    const LOWER: f64 = 1e-9;
    let purity_at = |p: f64| -> Result<f64> { Ok(purity(&rank_deficient_state(&template.with_purity_param(p))?)) };

    let low = purity_at(LOWER)?;
    if target >= 1.0 {
        return Ok(template.with_purity_param(1.0));
    }
    if target <= low {
        if (target - low).abs() < 1e-9 {
            return Ok(template.with_purity_param(LOWER));
        }
        return Err(TomoError::InvalidRecipe(format!(
            "purity {target} is below the reachable minimum {low:.6} for this recipe"
        )));
    }

    let (mut lo, mut hi) = (LOWER, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if purity_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let recipe = template.with_purity_param(0.5 * (lo + hi));
    let reached = purity_at(recipe.purity_param)?;
    if (reached - target).abs() > 1e-6 {
        return Err(TomoError::InvalidRecipe(format!(
            "purity {target} not reachable by bisection (closest {reached:.8})"
        )));
    }
    Ok(recipe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_states_are_rank_one_and_deterministic() {
        for seed in 0..10 {
            let a = random_pure_state(3, seed).unwrap();
            assert!((purity(&a) - 1.0).abs() < 1e-12);
            assert!((a.trace().re - 1.0).abs() < 1e-12);
            assert_eq!(a, random_pure_state(3, seed).unwrap());
        }
        assert_ne!(random_pure_state(2, 1).unwrap(), random_pure_state(2, 2).unwrap());
    }

    #[test]
    fn rotation_is_unitary() {
        let mut rng = rng_from_seed(3);
        let u = random_rotation(3, 0.3, &mut rng);
        let err = (u.adjoint() * &u - CMatrix::identity(8, 8)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn unit_purity_param_returns_pure_state() {
        let recipe = StateRecipe::new(2, 1.0, 11).with_rotation(0.2);
        let mixed = mixed_state(&recipe).unwrap();
        let mut rng = rng_from_seed(11);
        let pure = DensityMatrix::pure(&haar_ket(2, &mut rng)).unwrap();
        assert_eq!(mixed, pure);
    }

    #[test]
    fn small_purity_param_approaches_maximally_mixed() {
        let recipe = StateRecipe::new(2, 1e-6, 5);
        let s = mixed_state(&recipe).unwrap();
        // Direct evaluation: rho = (p P + 2(1-p)/3 I/4) / (p + 2(1-p)/3).
        let p = 1e-6;
        let z = p + 2.0 * (1.0 - p) / 3.0;
        let floor = 2.0 * (1.0 - p) / 3.0 / 4.0 / z;
        let eig = eigendecompose(&s).unwrap().eigenvalues;
        assert!((eig[0] - (p / z + floor)).abs() < 1e-12);
        for v in &eig[1..] {
            assert!((v - floor).abs() < 1e-12);
        }
        assert!((purity(&s) - 0.25).abs() < 1e-5);
    }

    #[test]
    fn rotation_error_keeps_state_valid() {
        let recipe = StateRecipe::new(3, 0.7, 9).with_rotation(0.3);
        let s = mixed_state(&recipe).unwrap();
        assert!(s.is_normalized());
        assert!(s.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn huge_rotation_error_is_rejected() {
        let recipe = StateRecipe::new(1, 0.01, 2).with_rotation(50.0);
        let found = (0..20).any(|seed| {
            matches!(mixed_state(&StateRecipe { seed, ..recipe }), Err(TomoError::NonPhysicalRecipe { .. }))
        });
        assert!(found);
    }

    #[test]
    fn purity_is_monotone_without_rotation() {
        let mut last = 0.0;
        for k in 1..=20 {
            let s = mixed_state(&StateRecipe::new(2, k as f64 / 20.0, 4)).unwrap();
            let pur = purity(&s);
            assert!(pur >= last - 1e-12);
            last = pur;
        }
    }

    #[test]
    fn rank_deficiency() {
        let base = StateRecipe::new(2, 0.8, 21);
        assert_eq!(rank_deficient_state(&base).unwrap(), mixed_state(&base).unwrap());

        let half = base.with_zero_fraction(0.5);
        let s = rank_deficient_state(&half).unwrap();
        let eig = eigendecompose(&s).unwrap().eigenvalues;
        assert!(eig[2].abs() < 1e-12 && eig[3].abs() < 1e-12, "{eig:?}");
        assert!(eig[1] > 1e-3);
        assert!(s.is_normalized());

        let s3 = rank_deficient_state(&StateRecipe::new(3, 0.6, 1).with_zero_fraction(0.4).with_rotation(0.1)).unwrap();
        let eig = eigendecompose(&s3).unwrap().eigenvalues;
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-12).count(), 3);
    }

    #[test]
    fn invalid_recipes() {
        assert!(StateRecipe::new(2, 0.0, 0).validate().is_err());
        assert!(StateRecipe::new(2, 1.5, 0).validate().is_err());
        assert!(StateRecipe::new(0, 0.5, 0).validate().is_err());
        assert!(StateRecipe::new(2, 0.5, 0).with_zero_fraction(1.0).validate().is_err());
        assert!(StateRecipe::new(2, 0.5, 0).with_rotation(-1.0).validate().is_err());
        assert_eq!(StateRecipe::new(2, 0.5, 0).with_zero_fraction(0.99).zeroed_count(), 3);
    }

    #[test]
    fn purity_target_by_bisection() {
        let template = StateRecipe::new(2, 0.5, 8).with_zero_fraction(0.5).with_rotation(0.1);
        let recipe = solve_purity_param(&template, 0.94).unwrap();
        let s = rank_deficient_state(&recipe).unwrap();
        assert!((purity(&s) - 0.94).abs() < 1e-6);

        // Plain bisection on the mixed family (no rank deficiency) as oracle.
        let plain = StateRecipe::new(2, 0.5, 8);
        let recipe = solve_purity_param(&plain, 0.94).unwrap();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if purity(&mixed_state(&plain.with_purity_param(mid)).unwrap()) < 0.94 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((recipe.purity_param - lo).abs() < 1e-8);
    }
}
