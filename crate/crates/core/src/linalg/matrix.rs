use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix from {} entries",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Real matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * n + i] = C64::new(x, 0.0);
        }
        m
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    /// In-place `self += s * other`; shapes must agree.
    pub fn axpy(&mut self, s: C64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[l * m..(l + 1) * m];
                for (o, b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { rows: n, cols: m, data: out })
    }

    pub fn mat_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix applied to length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::Dimension(format!("trace of {}x{} matrix", self.rows, self.cols)));
        }
        Ok((0..self.rows).map(|i| self.data[i * self.cols + i]).sum())
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::Dimension(format!(
                "trace of {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = ZERO;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += self.data[i * self.cols + j] * other.data[j * other.cols + i];
            }
        }
        Ok(acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product, `(a⊗b)[i·rb+k, j·cb+l] = a[i,j]·b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rb, cb) = (b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(a.rows * rb, a.cols * cb);
    let oc = out.cols;
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a.data[i * a.cols + j];
            if x == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out.data[(i * rb + k) * oc + j * cb + l] = x * b.data[k * cb + l];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list, left to right.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for t in (0..dims.len()).rev() {
        out[t] = index % dims[t];
        index /= dims[t];
    }
}

/// Trace out every subsystem not listed in `keep`; kept factors stay in order.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || !m.is_square() || total != m.rows {
        return Err(Error::Dimension(format!(
            "subsystem dims {dims:?} do not factor a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let mut kept = vec![false; dims.len()];
    for &k in keep {
        if k >= dims.len() {
            return Err(Error::IndexOutOfRange { index: k, len: dims.len() });
        }
        kept[k] = true;
    }
    let out_dim: usize = dims.iter().zip(&kept).filter(|(_, k)| **k).map(|(d, _)| d).product();
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    let mut r = vec![0; dims.len()];
    let mut c = vec![0; dims.len()];
    for row in 0..total {
        digits(row, dims, &mut r);
        for col in 0..total {
            digits(col, dims, &mut c);
            let mut traced_match = true;
            let (mut oi, mut oj) = (0, 0);
            for t in 0..dims.len() {
                if kept[t] {
                    oi = oi * dims[t] + r[t];
                    oj = oj * dims[t] + c[t];
                } else if r[t] != c[t] {
                    traced_match = false;
                    break;
                }
            }
            if traced_match {
                out.data[oi * out_dim + oj] += m.data[row * total + col];
            }
        }
    }
    Ok(out)
}

/// Hilbert–Schmidt norm squared, `Tr(M†M)`.
pub fn hs_norm_sq(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("hs norm of {}x{} matrix", m.rows, m.cols)));
    }
    Ok(m.data.iter().map(|z| z.norm_sqr()).sum())
}

/// Commutator `[a, b] = ab − ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::paulis::{x, z};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed;
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (s >> 33) as f64 / (1u64 << 31) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (s >> 33) as f64 / (1u64 << 31) as f64 - 0.5;
            c(a, b)
        })
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        assert_eq!(kron(&z(), &i2), ComplexMatrix::from_diag(&[1.0, 1.0, -1.0, -1.0]));
    }

    #[test]
    fn kron_acts_factorwise() {
        let (a, b) = (x(), z());
        let k = kron(&a, &b);
        let v = [c(0.3, -0.1), c(0.7, 0.2)];
        let w = [c(-0.4, 0.5), c(0.1, 0.9)];
        let vw: Vec<C64> = v.iter().flat_map(|vi| w.iter().map(move |wj| vi * wj)).collect();
        let av = a.mat_vec(&v).unwrap();
        let bw = b.mat_vec(&w).unwrap();
        let expect: Vec<C64> = av.iter().flat_map(|x| bw.iter().map(move |y| x * y)).collect();
        let got = k.mat_vec(&vw).unwrap();
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).norm() < 1e-15);
        }
        // anti-diagonal blocks
        assert_eq!(k[(0, 0)], ZERO);
        assert_eq!(k[(0, 2)], ONE);
        assert_eq!(k[(3, 1)], c(-1.0, 0.0));
    }

    #[test]
    fn kron_index_formula() {
        let a = sample_matrix(2, 3, 1);
        let b = sample_matrix(3, 2, 2);
        let k = kron(&a, &b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_is_associative() {
        let a = sample_matrix(2, 2, 3);
        let b = sample_matrix(3, 3, 4);
        let cm = sample_matrix(2, 2, 5);
        assert!(kron(&kron(&a, &b), &cm).max_abs_diff(&kron(&a, &kron(&b, &cm))) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let pt = partial_trace(&ComplexMatrix::identity(4), &[2, 2], &[0]).unwrap();
        assert_eq!(pt, ComplexMatrix::identity(2).scale_real(2.0));

        let a = sample_matrix(2, 2, 6);
        let b = sample_matrix(3, 3, 7);
        let pt = partial_trace(&kron(&a, &b), &[2, 3], &[0]).unwrap();
        let expect = a.scale(b.trace().unwrap());
        assert!(pt.max_abs_diff(&expect) < 1e-15);

        let m = sample_matrix(4, 4, 8);
        let pt = partial_trace(&m, &[2, 2], &[1]).unwrap();
        assert!((pt.trace().unwrap() - m.trace().unwrap()).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_composes() {
        let m = sample_matrix(12, 12, 9);
        let joint = partial_trace(&m, &[2, 3, 2], &[1]).unwrap();
        let step = partial_trace(&m, &[2, 3, 2], &[1, 2]).unwrap();
        let step = partial_trace(&step, &[3, 2], &[0]).unwrap();
        assert_eq!(joint, step);
        let other = partial_trace(&m, &[2, 3, 2], &[0, 1]).unwrap();
        let other = partial_trace(&other, &[2, 3], &[1]).unwrap();
        assert_eq!(joint, other);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = ComplexMatrix::identity(4);
        assert!(matches!(partial_trace(&m, &[2, 3], &[0]), Err(Error::Dimension(_))));
        assert!(partial_trace(&m, &[2, 2], &[2]).is_err());
    }

    #[test]
    fn hs_norm_examples() {
        assert_eq!(hs_norm_sq(&ComplexMatrix::identity(2)).unwrap(), 2.0);
        assert_eq!(hs_norm_sq(&z()).unwrap(), 2.0);
        assert_eq!(hs_norm_sq(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        assert!(hs_norm_sq(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn from_vec_validates() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![ONE; 3]).is_err());
        assert_eq!(
            ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn trace_product_matches_matmul() {
        let a = sample_matrix(3, 4, 10);
        let b = sample_matrix(4, 3, 11);
        let direct = a.matmul(&b).unwrap().trace().unwrap();
        assert!((a.trace_product(&b).unwrap() - direct).norm() < 1e-14);
    }
}
