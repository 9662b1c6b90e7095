//! Quantum state tomography: linear reconstruction from projective
//! measurement counts and corrections that return a physical density matrix.
//!
//! The pipeline runs [`states`] → [`measurement`] → [`linear`] →
//! [`correction`]. [`derivation`] rebuilds the weighting curve used by the
//! eigenvalue-optimization correction.

pub mod correction;
pub mod density;
pub mod derivation;
pub mod error;
pub mod linear;
pub mod measurement;
pub mod optim;
pub mod pauli;
pub mod rng;
pub mod states;
pub mod tolerance;

pub use density::{eigendecompose, fidelity, from_spectrum, infidelity, purity, CMatrix, CVector, DensityMatrix, Spectrum};
pub use error::{Result, TomoError};
pub use measurement::{cube_projectors, simulate_counts, CountRecord, NoiseModel, ProjectorSet};
