use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{C64, ComplexMatrix};
use super::spectral::{from_nalgebra, operator_norm, to_nalgebra};
use super::{HermitianObservable, UnitaryGate};

/// Complex normal with `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Square matrix of i.i.d. complex normals.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| complex_normal(rng))
}

/// Haar-random unitary: QR of a Ginibre matrix with the diagonal phases of R
/// moved into Q so the factorization is unique.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryGate {
    assert!(dim >= 1, "haar_unitary needs dim >= 1");
    loop {
        let g = ginibre(dim, rng);
        let qr = to_nalgebra(&g).qr();
        let r = qr.r();
        let phases: Option<Vec<C64>> = (0..dim)
            .map(|j| {
                let rjj = r[(j, j)];
                let n = rjj.norm();
                (n > 1e-12).then(|| rjj / n)
            })
            .collect();
        let Some(phases) = phases else { continue };
        let mut q = from_nalgebra(&qr.q());
        for i in 0..dim {
            for (j, p) in phases.iter().enumerate() {
                q[(i, j)] *= p;
            }
        }
        return UnitaryGate::new_unchecked(q);
    }
}

/// Haar-random unit vector; distributed as any column of a Haar unitary.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
        let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if norm > 1e-150 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// `(M + M†)/2` for complex normal `M`, rescaled to unit operator norm.
pub fn gue_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianObservable {
    let m = ginibre(dim, rng);
    let h = ComplexMatrix::from_fn(dim, dim, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let h = HermitianObservable::new_unchecked(h);
    let norm = operator_norm(&h);
    if norm > 0.0 { h.scale(1.0 / norm) } else { h }
}

/// Weyl operator `X^a Z^b` on `C^dim`, with `X|j⟩ = |j+1⟩` and `Z|j⟩ = ω^j|j⟩`.
pub fn weyl_operator(dim: usize, a: usize, b: usize) -> UnitaryGate {
    let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i == (j + a) % dim {
            C64::from_polar(1.0, 2.0 * PI * ((b * j) % dim) as f64 / dim as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    UnitaryGate::new_unchecked(m)
}
