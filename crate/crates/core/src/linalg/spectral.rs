use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::matrix::{C64, ComplexMatrix};
use super::{HermitianObservable, UnitaryGate};

pub(crate) fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues and eigenvectors (as columns) of a Hermitian matrix.
pub fn eigh(h: &HermitianObservable) -> (Vec<f64>, ComplexMatrix) {
    let eig = to_nalgebra(h.matrix()).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), from_nalgebra(&eig.eigenvectors))
}

/// Largest absolute eigenvalue.
pub fn operator_norm(h: &HermitianObservable) -> f64 {
    let eig = to_nalgebra(h.matrix()).symmetric_eigenvalues();
    eig.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `exp(−iθH)`.
pub fn expm_hermitian(h: &HermitianObservable, theta: f64) -> UnitaryGate {
    let (vals, vecs) = eigh(h);
    let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, -theta * l)).collect();
    let n = vals.len();
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| vecs[(i, k)] * phases[k] * vecs[(j, k)].conj()).sum()
    });
    UnitaryGate::new_unchecked(m)
}

/// Eigenvalues of a general square matrix from the diagonal of its Schur form.
#[cfg(test)]
pub(crate) fn schur_eigenvalues(m: &ComplexMatrix) -> Vec<C64> {
    let (_, t) = to_nalgebra(m).schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}
