//! Second-moment Haar averages and the two-label tree values they produce.
//!
//! For `U` Haar on `C^N`, `∫ U⊗U x U†⊗U† = c_I·I + c_S·S` where `S` swaps the
//! copies. A single MPS site contracts that channel against a bond pairing and
//! the physical observable; the result only depends on which pairing enters on
//! the input side and which one leaves on the bond side.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, HermitianObservable, ZERO, haar_unitary, kron};
use crate::mc::{self, EstimateResult, Executor};

/// Two-copy pairing: `S` keeps each copy on itself, `A` swaps them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PermLabel {
    S,
    A,
}

impl PermLabel {
    pub const ALL: [PermLabel; 2] = [PermLabel::S, PermLabel::A];

    fn index(self) -> usize {
        match self {
            PermLabel::S => 0,
            PermLabel::A => 1,
        }
    }
}

impl core::fmt::Display for PermLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            PermLabel::S => "S",
            PermLabel::A => "A",
        })
    }
}

/// Operator on two copies of `C^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoCopyOperator {
    dim: usize,
    matrix: ComplexMatrix,
}

impl TwoCopyOperator {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(Error::Dimension(format!(
                "two-copy operator on dim {dim} needs {0}x{0}, got {1}x{2}",
                dim * dim,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

fn swap_matrix(n: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            s[(j * n + i, i * n + j)] = C64::new(1.0, 0.0);
        }
    }
    s
}

/// Identity and swap on `C^N ⊗ C^N`.
pub fn perm_ops(n_dim: usize) -> (TwoCopyOperator, TwoCopyOperator) {
    (
        TwoCopyOperator { dim: n_dim, matrix: ComplexMatrix::identity(n_dim * n_dim) },
        TwoCopyOperator { dim: n_dim, matrix: swap_matrix(n_dim) },
    )
}

/// `Tr(x·I)` and `Tr(x·S)`.
fn pairing_traces(x: &ComplexMatrix, n: usize) -> (C64, C64) {
    let mut t_id = ZERO;
    let mut t_swap = ZERO;
    for i in 0..n {
        for j in 0..n {
            t_id += x[(i * n + j, i * n + j)];
            t_swap += x[(i * n + j, j * n + i)];
        }
    }
    (t_id, t_swap)
}

/// Exact Haar twirl `∫ U⊗U x U†⊗U† dU`.
pub fn second_moment(x: &ComplexMatrix, n_dim: usize) -> Result<ComplexMatrix> {
    let nn = n_dim * n_dim;
    if n_dim == 0 || x.rows() != nn || x.cols() != nn {
        return Err(Error::Dimension(format!(
            "second moment on dim {n_dim} needs {nn}x{nn}, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if n_dim == 1 {
        return Ok(x.clone());
    }
    let n = n_dim as f64;
    let q = n * n - 1.0;
    let (t_id, t_swap) = pairing_traces(x, n_dim);
    let c_id = (t_id - t_swap / n) / q;
    let c_swap = (t_swap - t_id / n) / q;
    let mut out = swap_matrix(n_dim).scale(c_swap);
    for i in 0..nn {
        out[(i, i)] += c_id;
    }
    Ok(out)
}

/// `q`, `ξ`, `η` for bond dimension `D` and physical dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignConstants {
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub q: f64,
    pub xi: f64,
    pub eta: f64,
}

impl DesignConstants {
    pub fn new(bond_dim: usize, phys_dim: usize) -> Result<Self> {
        if bond_dim == 0 || phys_dim == 0 || bond_dim * phys_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "design constants need D >= 1, d >= 1 and Dd >= 2 (got D={bond_dim}, d={phys_dim})"
            )));
        }
        let (big, small) = (bond_dim as f64, phys_dim as f64);
        let q = (big * small) * (big * small) - 1.0;
        Ok(Self {
            bond_dim,
            phys_dim,
            q,
            xi: big * (small * small - 1.0) / q,
            eta: small * (big * big - 1.0) / q,
        })
    }

    /// `Dd`.
    pub fn site_dim(&self) -> usize {
        self.bond_dim * self.phys_dim
    }

    /// `(1 − η^L)/(1 − η)`, continued to any integer `L`.
    pub fn gamma(&self, len: i64) -> f64 {
        (1.0 - powi(self.eta, len)) / (1.0 - self.eta)
    }
}

pub(crate) fn powi(x: f64, k: i64) -> f64 {
    libm::pow(x, k as f64)
}

/// Tree chain of `chain_len` sites; length 0 is the single vertex.
pub fn tree_chain(left: PermLabel, right: PermLabel, chain_len: usize, dc: &DesignConstants) -> f64 {
    let len = chain_len.max(1) as i64;
    match (left, right) {
        (PermLabel::S, PermLabel::S) => 1.0,
        (PermLabel::S, PermLabel::A) => dc.xi * dc.gamma(len),
        (PermLabel::A, PermLabel::S) => 0.0,
        (PermLabel::A, PermLabel::A) => powi(dc.eta, len),
    }
}

fn check_phys(o: &HermitianObservable, dc: &DesignConstants) -> Result<()> {
    if o.dim() != dc.phys_dim {
        return Err(Error::Dimension(format!(
            "observable of dim {} on physical dim {}",
            o.dim(),
            dc.phys_dim
        )));
    }
    Ok(())
}

/// Single-vertex tree with the observable inserted on the physical leg.
pub fn o_tree(left: PermLabel, right: PermLabel, o: &HermitianObservable, dc: &DesignConstants) -> Result<f64> {
    check_phys(o, dc)?;
    let t1sq = o.trace() * o.trace();
    let t2 = o.trace_sq();
    let (big, small, q) = (dc.bond_dim as f64, dc.phys_dim as f64, dc.q);
    Ok(match (left, right) {
        (PermLabel::S, PermLabel::S) => (big * big * t1sq - t2 / small) / q,
        (PermLabel::S, PermLabel::A) => big / q * (t1sq - t2 / small),
        (PermLabel::A, PermLabel::S) => big / q * (-t1sq / small + t2),
        (PermLabel::A, PermLabel::A) => (-t1sq / small + big * big * t2) / q,
    })
}

/// Embed a bond-pair operator (on `D⊗D`) and a physical-pair operator (on
/// `d⊗d`) into the two-copy site space ordered `(D d)⊗(D d)`.
pub fn two_copy_embed(bond: &ComplexMatrix, phys: &ComplexMatrix, bond_dim: usize, phys_dim: usize) -> Result<ComplexMatrix> {
    let (bd, pd) = (bond_dim, phys_dim);
    if bond.rows() != bd * bd || !bond.is_square() || phys.rows() != pd * pd || !phys.is_square() {
        return Err(Error::Dimension(format!("two-copy embed of D={bd}, d={pd}")));
    }
    let site = bd * pd;
    let split = |idx: usize| {
        let (first, second) = (idx / site, idx % site);
        let (b1, p1) = (first / pd, first % pd);
        let (b2, p2) = (second / pd, second % pd);
        (b1 * bd + b2, p1 * pd + p2)
    };
    Ok(ComplexMatrix::from_fn(site * site, site * site, |r, c| {
        let (br, pr) = split(r);
        let (bc, pc) = split(c);
        bond[(br, bc)] * phys[(pr, pc)]
    }))
}

/// Input operator selecting a pairing: `|01⟩⟨01|` for `S`, `|01⟩⟨10|` for `A`.
fn input_operator(label: PermLabel, n: usize) -> ComplexMatrix {
    let mut x = ComplexMatrix::zeros(n * n, n * n);
    let col = match label {
        PermLabel::S => 1,
        PermLabel::A => n,
    };
    x[(1, col)] = C64::new(1.0, 0.0);
    x
}

/// Output operator: pairing on the bond copies, `O⊗O` on the physical copies.
fn output_operator(label: PermLabel, o: Option<&HermitianObservable>, dc: &DesignConstants) -> Result<ComplexMatrix> {
    let (id, swap) = perm_ops(dc.bond_dim);
    let bond = match label {
        PermLabel::S => id.into_matrix(),
        PermLabel::A => swap.into_matrix(),
    };
    let phys = match o {
        Some(o) => {
            check_phys(o, dc)?;
            kron(o.matrix(), o.matrix())
        }
        None => ComplexMatrix::identity(dc.phys_dim * dc.phys_dim),
    };
    two_copy_embed(&bond, &phys, dc.bond_dim, dc.phys_dim)
}

/// Tree value from the exact twirl of the input pairing contracted with the
/// output pairing. `o = None` is the plain tree, `Some` the observable tree.
pub fn tree_diagram(
    left: PermLabel,
    right: PermLabel,
    o: Option<&HermitianObservable>,
    dc: &DesignConstants,
) -> Result<f64> {
    let n = dc.site_dim();
    let twirled = second_moment(&input_operator(left, n), n)?;
    Ok(twirled.trace_product(&output_operator(right, o, dc)?)?.re)
}

/// Monte-Carlo estimate of the same contraction over Haar draws.
pub fn tree_mc<E: Executor + ?Sized>(
    left: PermLabel,
    right: PermLabel,
    o: Option<&HermitianObservable>,
    dc: &DesignConstants,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    let n = dc.site_dim();
    let y = output_operator(right, o, dc)?;
    mc::estimate(
        |_, rng: &mut ChaCha8Rng| {
            let u = haar_unitary(n, rng);
            let (u0, u1) = (u.matrix().column(0), u.matrix().column(1));
            let ket = product_state(&u0, &u1);
            let bra = match left {
                PermLabel::S => ket.clone(),
                PermLabel::A => product_state(&u1, &u0),
            };
            let y_ket = y.mat_vec(&ket).expect("dimensions fixed above");
            bra.iter().zip(&y_ket).map(|(b, k)| b.conj() * k).sum::<C64>().re
        },
        samples,
        seed,
        exec,
    )
}

fn product_state(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Sample average of `U⊗U x U†⊗U†` over Haar draws.
pub fn mc_twirl<E: Executor + ?Sized>(
    x: &ComplexMatrix,
    n_dim: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<ComplexMatrix> {
    let nn = n_dim * n_dim;
    if n_dim == 0 || x.rows() != nn || x.cols() != nn {
        return Err(Error::Dimension(format!(
            "twirl on dim {n_dim} needs {nn}x{nn}, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let blocks = mc::map_blocks(samples, exec, |range| {
        let mut acc = mc::CompensatedMatrix::zeros(nn, nn);
        for i in range {
            let mut rng = mc::sample_rng(seed, i as u64);
            let u = haar_unitary(n_dim, &mut rng);
            let uu = kron(u.matrix(), u.matrix());
            let term = uu.matmul(x).and_then(|m| m.matmul(&uu.adjoint())).expect("square");
            acc.add(&term);
        }
        acc
    });
    let mut total = mc::CompensatedMatrix::zeros(nn, nn);
    for b in &blocks {
        total.merge(b);
    }
    Ok(total.value().scale_real(1.0 / samples as f64))
}

/// 2x2 matrix of single-vertex tree values indexed `[left][right]`.
pub fn tree_matrix(dc: &DesignConstants) -> [[f64; 2]; 2] {
    let mut t = [[0.0; 2]; 2];
    for l in PermLabel::ALL {
        for r in PermLabel::ALL {
            t[l.index()][r.index()] = tree_chain(l, r, 1, dc);
        }
    }
    t
}
