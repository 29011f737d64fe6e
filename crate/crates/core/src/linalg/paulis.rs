//! Named single-qubit matrices and Pauli strings.

use alloc::format;
use alloc::vec::Vec;

use super::matrix::{C64, ComplexMatrix, kron_all};
use crate::error::{Error, Result};

pub fn i2() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn y() -> ComplexMatrix {
    ComplexMatrix::from_vec(
        2,
        2,
        alloc::vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
    )
    .unwrap()
}

pub fn z() -> ComplexMatrix {
    ComplexMatrix::from_diag(&[1.0, -1.0])
}

pub fn hadamard() -> ComplexMatrix {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 2, &[s, s, s, -s]).unwrap()
}

/// Tensor product of Paulis named by a string such as `"ZI"`, leftmost factor first.
pub fn pauli_string(word: &str) -> Result<ComplexMatrix> {
    if word.is_empty() {
        return Err(Error::InvalidParameter("empty Pauli string".into()));
    }
    let factors = word
        .chars()
        .map(|c| match c.to_ascii_uppercase() {
            'I' => Ok(i2()),
            'X' => Ok(x()),
            'Y' => Ok(y()),
            'Z' => Ok(z()),
            other => Err(Error::InvalidParameter(format!("unknown Pauli letter {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(kron_all(&factors))
}
