//! Dense complex linear algebra and random-matrix sampling.

mod matrix;
pub mod paulis;
mod random;
mod spectral;

use alloc::format;

pub use matrix::{C64, ComplexMatrix, ONE, ZERO, commutator, hs_norm_sq, kron, kron_all, partial_trace};
pub use random::{complex_normal, ginibre, gue_hermitian, haar_state, haar_unitary, weyl_operator};
pub use spectral::{eigh, expm_hermitian, operator_norm};
#[cfg(test)]
pub(crate) use spectral::schur_eigenvalues;

use crate::error::{Error, Result};

/// Absolute tolerance for the unitarity and hermiticity checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// A square unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryGate {
    matrix: ComplexMatrix,
}

impl UnitaryGate {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!("gate of shape {}x{}", matrix.rows(), matrix.cols())));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        let dev = matrix.adjoint().matmul(&matrix)?.max_abs_diff(&ComplexMatrix::identity(matrix.rows()));
        if dev > STRUCTURE_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Ok(Self { matrix: self.matrix.matmul(&other.matrix)? })
    }
}

/// A square Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianObservable {
    matrix: ComplexMatrix,
}

impl HermitianObservable {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "observable of shape {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        let dev = matrix.max_abs_diff(&matrix.adjoint());
        if dev > STRUCTURE_TOL * (1.0 + matrix.max_abs()) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self { matrix: ComplexMatrix::from_diag(diag) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale_real(s) }
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        self.matrix.trace().map(|t| t.re).unwrap_or(0.0)
    }

    /// `Tr(H²)`.
    pub fn trace_sq(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).map(|t| t.re).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_validation() {
        assert!(UnitaryGate::new(paulis::x()).is_ok());
        assert!(matches!(UnitaryGate::new(paulis::x().scale_real(1.1)), Err(Error::NotUnitary(_))));
        assert!(UnitaryGate::new(ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn observable_validation() {
        assert!(HermitianObservable::new(paulis::y()).is_ok());
        let mut m = paulis::z();
        m[(0, 1)] = C64::new(0.0, 1.0);
        assert!(matches!(HermitianObservable::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn observable_traces() {
        let o = HermitianObservable::from_diag(&[1.0, 0.0]);
        assert_eq!(o.trace(), 1.0);
        assert_eq!(o.trace_sq(), 1.0);
        let z = HermitianObservable::new(paulis::z()).unwrap();
        assert_eq!((z.trace(), z.trace_sq()), (0.0, 2.0));
    }
}
