//! Unitarily embedded MPS on a periodic bond ring.
//!
//! Each site gate acts on `bond ⊗ physical` (bond index first). Feeding `|0⟩`
//! into the physical input gives the site tensor
//! `A^s[α][β] = ⟨β, s| U |α, 0⟩` and the state `ψ_{s₁…sₙ} = Tr[A^{s₁}⋯A^{sₙ}]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, HermitianObservable, UnitaryGate, ZERO, expm_hermitian, kron};

/// Largest statevector the dense oracle will build.
pub const STATEVECTOR_CAP: usize = 1 << 12;

/// Relative tolerance on the imaginary part of a real expectation value.
pub const RESIDUE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct MpsAnsatz {
    n: usize,
    bond_dim: usize,
    phys_dim: usize,
    gates: Vec<UnitaryGate>,
}

impl MpsAnsatz {
    pub fn new(n: usize, bond_dim: usize, phys_dim: usize, gates: Vec<UnitaryGate>) -> Result<Self> {
        if n < 2 || bond_dim < 1 || phys_dim < 2 {
            return Err(Error::Geometry(format!(
                "MPS needs n >= 2, D >= 1, d >= 2 (got n={n}, D={bond_dim}, d={phys_dim})"
            )));
        }
        if gates.len() != n {
            return Err(Error::Dimension(format!("{} gates for {n} sites", gates.len())));
        }
        let site = bond_dim * phys_dim;
        if let Some(g) = gates.iter().find(|g| g.dim() != site) {
            return Err(Error::Dimension(format!("gate of dim {} on site dim {site}", g.dim())));
        }
        Ok(Self { n, bond_dim, phys_dim, gates })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn gates(&self) -> &[UnitaryGate] {
        &self.gates
    }

    /// Copy with the gate at `site` replaced.
    pub fn with_gate(&self, site: usize, gate: UnitaryGate) -> Result<Self> {
        self.check_site(site)?;
        let mut gates = self.gates.clone();
        gates[site] = gate;
        Self::new(self.n, self.bond_dim, self.phys_dim, gates)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n {
            return Err(Error::IndexOutOfRange { index: site, len: self.n });
        }
        Ok(())
    }

    fn check_observable(&self, o: &HermitianObservable) -> Result<()> {
        if o.dim() != self.phys_dim {
            return Err(Error::Dimension(format!("observable of dim {} on physical dim {}", o.dim(), self.phys_dim)));
        }
        Ok(())
    }
}

/// Split of the gate at the derivative point: `U = u_minus·u_plus`, with
/// `∂U = u_minus·(−iG)·u_plus`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteDecomposition {
    pub site: usize,
    pub u_minus: UnitaryGate,
    pub g: HermitianObservable,
    pub u_plus: UnitaryGate,
}

impl SiteDecomposition {
    pub fn new(site: usize, u_minus: UnitaryGate, g: HermitianObservable, u_plus: UnitaryGate) -> Result<Self> {
        if u_minus.dim() != u_plus.dim() || g.dim() != u_plus.dim() {
            return Err(Error::Dimension(format!(
                "decomposition dims {} / {} / {}",
                u_minus.dim(),
                g.dim(),
                u_plus.dim()
            )));
        }
        Ok(Self { site, u_minus, g, u_plus })
    }

    /// `u_minus·u_plus`.
    pub fn gate(&self) -> UnitaryGate {
        UnitaryGate::new_unchecked(self.u_minus.matrix().matmul(self.u_plus.matrix()).expect("square"))
    }

    /// `u_minus·exp(−iθG)·u_plus`.
    pub fn gate_at(&self, theta: f64) -> UnitaryGate {
        let rot = expm_hermitian(&self.g, theta);
        let m = self.u_minus.matrix().matmul(rot.matrix()).and_then(|m| m.matmul(self.u_plus.matrix()));
        UnitaryGate::new_unchecked(m.expect("square"))
    }

    /// `u_minus·(−iG)·u_plus`.
    pub fn derivative(&self) -> ComplexMatrix {
        let mg = self.g.matrix().scale(C64::new(0.0, -1.0));
        self.u_minus.matrix().matmul(&mg).and_then(|m| m.matmul(self.u_plus.matrix())).expect("square")
    }

    fn check(&self, m: &MpsAnsatz) -> Result<()> {
        m.check_site(self.site)?;
        if self.u_plus.dim() != m.bond_dim * m.phys_dim {
            return Err(Error::Dimension(format!(
                "decomposition of dim {} on site dim {}",
                self.u_plus.dim(),
                m.bond_dim * m.phys_dim
            )));
        }
        Ok(())
    }
}

/// Site tensor `A[s]`, one `D×D` matrix per physical outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub slices: Vec<ComplexMatrix>,
}

/// `D²×D²` ket⊗bra site contraction.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub matrix: ComplexMatrix,
}

fn tensor_of(u: &ComplexMatrix, bond_dim: usize, phys_dim: usize) -> SiteTensor {
    let slices = (0..phys_dim)
        .map(|s| ComplexMatrix::from_fn(bond_dim, bond_dim, |a, b| u[(b * phys_dim + s, a * phys_dim)]))
        .collect();
    SiteTensor { slices }
}

/// Site tensor of `gate` with the physical input fixed to `|0⟩`.
pub fn site_tensor(gate: &UnitaryGate, bond_dim: usize, phys_dim: usize) -> Result<SiteTensor> {
    if gate.dim() != bond_dim * phys_dim {
        return Err(Error::Dimension(format!("gate of dim {} for D={bond_dim}, d={phys_dim}", gate.dim())));
    }
    Ok(tensor_of(gate.matrix(), bond_dim, phys_dim))
}

/// `Σ_{s,s'} O[s][s'] · K^{s'} ⊗ conj(B^s)`, or `Σ_s K^s ⊗ conj(B^s)` without `O`.
fn mixed_transfer(ket: &SiteTensor, bra: &SiteTensor, obs: Option<&HermitianObservable>) -> ComplexMatrix {
    let d = ket.slices.len();
    let bd = ket.slices[0].rows();
    let mut e = ComplexMatrix::zeros(bd * bd, bd * bd);
    match obs {
        None => {
            for s in 0..d {
                e.axpy(C64::new(1.0, 0.0), &kron(&ket.slices[s], &bra.slices[s].conj()));
            }
        }
        Some(o) => {
            for s in 0..d {
                let bra_conj = bra.slices[s].conj();
                for sp in 0..d {
                    let w = o.matrix()[(s, sp)];
                    if w != ZERO {
                        e.axpy(w, &kron(&ket.slices[sp], &bra_conj));
                    }
                }
            }
        }
    }
    e
}

/// Transfer matrix of one site, optionally with an observable on its physical leg.
pub fn transfer(
    gate: &UnitaryGate,
    obs: Option<&HermitianObservable>,
    bond_dim: usize,
    phys_dim: usize,
) -> Result<TransferMatrix> {
    let a = site_tensor(gate, bond_dim, phys_dim)?;
    if let Some(o) = obs
        && o.dim() != phys_dim
    {
        return Err(Error::Dimension(format!("observable of dim {} on physical dim {phys_dim}", o.dim())));
    }
    Ok(TransferMatrix { matrix: mixed_transfer(&a, &a, obs) })
}

fn ring_trace(mats: &[ComplexMatrix]) -> C64 {
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc = acc.matmul(m).expect("transfer shapes agree");
    }
    acc.trace().expect("square")
}

pub(crate) fn real_part(z: C64) -> Result<f64> {
    if z.im.abs() > RESIDUE_TOL * (1.0 + z.re.abs()) {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

/// `⟨ψ| O at site_m |ψ⟩` by contracting transfer matrices around the ring.
/// The state is not normalized.
pub fn cost(m: &MpsAnsatz, o: &HermitianObservable, site_m: usize) -> Result<f64> {
    m.check_site(site_m)?;
    m.check_observable(o)?;
    let mats: Vec<ComplexMatrix> = m
        .gates
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let a = tensor_of(g.matrix(), m.bond_dim, m.phys_dim);
            mixed_transfer(&a, &a, (i == site_m).then_some(o))
        })
        .collect();
    real_part(ring_trace(&mats))
}

/// Amplitudes `ψ_{s₁…sₙ}` with site 0 as the most significant digit.
pub fn statevector(m: &MpsAnsatz) -> Result<Vec<C64>> {
    let d = m.phys_dim;
    let dim = (0..m.n).try_fold(1usize, |acc, _| acc.checked_mul(d).filter(|&x| x <= STATEVECTOR_CAP));
    let Some(dim) = dim else {
        return Err(Error::CapExceeded { dim: d.saturating_pow(m.n as u32), cap: STATEVECTOR_CAP });
    };
    let tensors: Vec<SiteTensor> = m.gates.iter().map(|g| tensor_of(g.matrix(), m.bond_dim, m.phys_dim)).collect();
    let mut digits = alloc::vec![0usize; m.n];
    let mut psi = Vec::with_capacity(dim);
    for idx in 0..dim {
        let mut rest = idx;
        for t in (0..m.n).rev() {
            digits[t] = rest % d;
            rest /= d;
        }
        let mut acc = tensors[0].slices[digits[0]].clone();
        for t in 1..m.n {
            acc = acc.matmul(&tensors[t].slices[digits[t]])?;
        }
        psi.push(acc.trace()?);
    }
    Ok(psi)
}

/// `⟨ψ|O_m|ψ⟩` from the explicit statevector; the dense oracle for [`cost`].
pub fn cost_statevector(m: &MpsAnsatz, o: &HermitianObservable, site_m: usize) -> Result<f64> {
    m.check_site(site_m)?;
    m.check_observable(o)?;
    let psi = statevector(m)?;
    let d = m.phys_dim;
    let stride = d.pow((m.n - 1 - site_m) as u32);
    let mut acc = ZERO;
    for (idx, amp) in psi.iter().enumerate() {
        let s = (idx / stride) % d;
        let base = idx - s * stride;
        for sp in 0..d {
            acc += amp.conj() * o.matrix()[(s, sp)] * psi[base + sp * stride];
        }
    }
    real_part(acc)
}

/// Exact `∂C` at the decomposition point: twice the real part of the ring
/// with the derivative tensor on the ket side at `dec.site`.
pub fn grad_site(m: &MpsAnsatz, dec: &SiteDecomposition, o: &HermitianObservable, site_m: usize) -> Result<f64> {
    dec.check(m)?;
    m.check_site(site_m)?;
    m.check_observable(o)?;
    let (bd, pd) = (m.bond_dim, m.phys_dim);
    let mats: Vec<ComplexMatrix> = (0..m.n)
        .map(|i| {
            let obs = (i == site_m).then_some(o);
            if i == dec.site {
                let ket = tensor_of(&dec.derivative(), bd, pd);
                let bra = tensor_of(dec.gate().matrix(), bd, pd);
                mixed_transfer(&ket, &bra, obs)
            } else {
                let a = tensor_of(m.gates[i].matrix(), bd, pd);
                mixed_transfer(&a, &a, obs)
            }
        })
        .collect();
    Ok(2.0 * ring_trace(&mats).re)
}

/// Central finite difference of [`cost`] along `θ` in `u_minus·e^{−iθG}·u_plus`.
pub fn grad_fd(m: &MpsAnsatz, dec: &SiteDecomposition, o: &HermitianObservable, site_m: usize, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    dec.check(m)?;
    let plus = cost(&m.with_gate(dec.site, dec.gate_at(h))?, o, site_m)?;
    let minus = cost(&m.with_gate(dec.site, dec.gate_at(-h))?, o, site_m)?;
    Ok((plus - minus) / (2.0 * h))
}
