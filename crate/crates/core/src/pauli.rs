//! Tensor products of Pauli matrices.
//!
//! A string is stored with qubit 0 first; qubit `q` of an `n`-qubit system
//! maps to bit `n - 1 - q` of a computational-basis index.

use std::fmt;

use num_complex::Complex64;

use crate::density::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i & 3]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// `sigma |bit> = phase |flipped bit>`.
    #[inline]
    fn act(self, bit: usize) -> (usize, Complex64) {
        let one = Complex64::new(1.0, 0.0);
        match self {
            Pauli::I => (bit, one),
            Pauli::X => (bit ^ 1, one),
            Pauli::Y => (bit ^ 1, if bit == 0 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) }),
            Pauli::Z => (bit, if bit == 0 { one } else { -one }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    /// Decodes a base-4 index, qubit 0 in the most significant digit.
    pub fn from_index(n: usize, index: usize) -> Self {
        Self((0..n).map(|q| Pauli::from_index(index >> (2 * (n - 1 - q)))).collect())
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| (acc << 2) | p.index())
    }

    pub fn qubits(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Image of a basis state: `P |k> = phase |target>`.
    pub fn apply_basis(&self, k: usize) -> (usize, Complex64) {
        let n = self.0.len();
        let mut target = 0usize;
        let mut phase = Complex64::new(1.0, 0.0);
        for (q, &p) in self.0.iter().enumerate() {
            let shift = n - 1 - q;
            let (bit, c) = p.act((k >> shift) & 1);
            target |= bit << shift;
            phase *= c;
        }
        (target, phase)
    }

    pub fn matrix(&self) -> CMatrix {
        let dim = 1usize << self.0.len();
        let mut m = CMatrix::zeros(dim, dim);
        for k in 0..dim {
            let (row, phase) = self.apply_basis(k);
            m[(row, k)] = phase;
        }
        m
    }

    /// `<psi| P |psi>`, real for Hermitian `P`.
    pub fn expectation_in(&self, psi: &[Complex64]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, amp) in psi.iter().enumerate() {
            let (row, phase) = self.apply_basis(k);
            acc += psi[row].conj() * phase * amp;
        }
        acc.re
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// All `4^n` Pauli strings as dense matrices, ordered by [`PauliString::index`].
pub fn pauli_basis(n: usize) -> Vec<CMatrix> {
    (0..1usize << (2 * n)).map(|a| PauliString::from_index(n, a).matrix()).collect()
}
