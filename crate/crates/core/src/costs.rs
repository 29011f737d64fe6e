//! Costs built from the first-qubit output distribution of a target unitary.

use alloc::format;

use crate::error::{Error, Result};
use crate::linalg::{C64, HermitianObservable, UnitaryGate, haar_state};
use crate::mc::{EstimateResult, Executor, estimate_filtered};

/// Floor applied to probabilities before taking logarithms.
pub const P_FLOOR: f64 = 1e-30;

/// Marginal distribution of one qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputDistribution {
    pub probs: [f64; 2],
}

impl OutputDistribution {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(p0) || !ok(p1) || (p0 + p1 - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("({p0}, {p1}) is not a distribution")));
        }
        Ok(Self { probs: [p0, p1] })
    }
}

/// A value computed through clamped logarithms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostKind {
    Generic,
    CrossEntropy,
    LinearXeb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostObservable {
    pub kind: CostKind,
    pub matrix: HermitianObservable,
    pub distribution: Option<OutputDistribution>,
    pub clamped: bool,
}

/// Which target-derived cost a Haar average is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetCost {
    Xeb,
    Xent,
}

fn qubit_count(dim: usize) -> Result<usize> {
    if !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// First-qubit marginal of `psi` on `n` qubits; qubit 0 is the most
/// significant bit of the basis index.
pub fn p_first_qubit_from_state(psi: &[C64], n: usize) -> Result<OutputDistribution> {
    let bits = qubit_count(psi.len())?;
    if bits != n || n == 0 {
        return Err(Error::Dimension(format!("state of length {} for {n} qubits", psi.len())));
    }
    let half = psi.len() / 2;
    let p0: f64 = psi[..half].iter().map(|z| z.norm_sqr()).sum();
    let p1: f64 = psi[half..].iter().map(|z| z.norm_sqr()).sum();
    let total = p0 + p1;
    Ok(OutputDistribution { probs: [p0 / total, p1 / total] })
}

/// `p(V, x)` for the first qubit of `V|0…0⟩`.
pub fn p_first_qubit(v: &UnitaryGate, n: usize) -> Result<OutputDistribution> {
    let bits = qubit_count(v.dim())?;
    if bits != n {
        return Err(Error::Dimension(format!("unitary of dim {} for {n} qubits", v.dim())));
    }
    p_first_qubit_from_state(&v.matrix().column(0), n)
}

/// `‖O − Tr(O) I/d‖²_HS = Tr(O²) − Tr(O)²/d`.
pub fn epsilon(o: &HermitianObservable, d: usize) -> Result<f64> {
    if o.dim() != d {
        return Err(Error::Dimension(format!("observable of dim {} with d = {d}", o.dim())));
    }
    let t = o.trace();
    Ok((o.trace_sq() - t * t / d as f64).max(0.0))
}

fn clamped_ln(p: f64) -> (f64, bool) {
    if p < P_FLOOR { (libm::log(P_FLOOR), true) } else { (libm::log(p), false) }
}

/// `−Σ_x q(x) ln p(x)` with `p` floored at [`P_FLOOR`].
pub fn cross_entropy(q: &OutputDistribution, p: &OutputDistribution) -> Flagged {
    let mut value = 0.0;
    let mut clamped = false;
    for x in 0..2 {
        let (l, c) = clamped_ln(p.probs[x]);
        clamped |= c;
        if q.probs[x] != 0.0 {
            value -= q.probs[x] * l;
        }
    }
    Flagged { value, clamped }
}

/// `2 Σ_x p(x) q(x) − 1`.
pub fn linear_xeb(p: &OutputDistribution, q: &OutputDistribution) -> f64 {
    2.0 * (p.probs[0] * q.probs[0] + p.probs[1] * q.probs[1]) - 1.0
}

/// `diag(2p(x) − 1)`.
pub fn observable_xeb_from(p: &OutputDistribution) -> CostObservable {
    CostObservable {
        kind: CostKind::LinearXeb,
        matrix: HermitianObservable::from_diag(&[2.0 * p.probs[0] - 1.0, 2.0 * p.probs[1] - 1.0]),
        distribution: Some(*p),
        clamped: false,
    }
}

/// `diag(−ln p(x))` with clamping.
pub fn observable_xent_from(p: &OutputDistribution) -> CostObservable {
    let (l0, c0) = clamped_ln(p.probs[0]);
    let (l1, c1) = clamped_ln(p.probs[1]);
    CostObservable {
        kind: CostKind::CrossEntropy,
        matrix: HermitianObservable::from_diag(&[-l0, -l1]),
        distribution: Some(*p),
        clamped: c0 || c1,
    }
}

pub fn observable_xeb(v: &UnitaryGate, n: usize) -> Result<CostObservable> {
    Ok(observable_xeb_from(&p_first_qubit(v, n)?))
}

pub fn observable_xent(v: &UnitaryGate, n: usize) -> Result<CostObservable> {
    Ok(observable_xent_from(&p_first_qubit(v, n)?))
}

/// Haar average of `ε(O_χ)`: `2/(2ⁿ + 1)`.
pub fn haar_avg_epsilon_xeb_closed(n: u32) -> f64 {
    2.0 / (libm::pow(2.0, n as f64) + 1.0)
}

/// `Σ_x ln(p(x))²` with clamping.
pub fn trace_oe_sq_from(p: &OutputDistribution) -> Flagged {
    let (l0, c0) = clamped_ln(p.probs[0]);
    let (l1, c1) = clamped_ln(p.probs[1]);
    Flagged { value: l0 * l0 + l1 * l1, clamped: c0 || c1 }
}

pub fn trace_oe_sq(v: &UnitaryGate, n: usize) -> Result<Flagged> {
    Ok(trace_oe_sq_from(&p_first_qubit(v, n)?))
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > 24 {
        return Err(Error::InvalidParameter(format!("qubit count must be in 1..=24, got {n}")));
    }
    Ok(())
}

/// Monte-Carlo Haar average of `ε(O)` for the chosen target cost. Clamped
/// cross-entropy samples are excluded and counted.
pub fn haar_avg_epsilon_mc<E: Executor + ?Sized>(
    kind: TargetCost,
    n: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    check_qubits(n)?;
    estimate_filtered(
        |_, rng| {
            let p = p_first_qubit_from_state(&haar_state(1 << n, rng), n)?;
            let obs = match kind {
                TargetCost::Xeb => observable_xeb_from(&p),
                TargetCost::Xent => observable_xent_from(&p),
            };
            if obs.clamped {
                return Ok(None);
            }
            epsilon(&obs.matrix, 2).map(Some)
        },
        samples,
        seed,
        exec,
    )
}

/// Monte-Carlo Haar average of `Tr(O_E²)`, excluding clamped samples.
pub fn haar_avg_trace_oe_sq_mc<E: Executor + ?Sized>(
    n: usize,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    check_qubits(n)?;
    estimate_filtered(
        |_, rng| {
            let p = p_first_qubit_from_state(&haar_state(1 << n, rng), n)?;
            let t = trace_oe_sq_from(&p);
            Ok((!t.clamped).then_some(t.value))
        },
        samples,
        seed,
        exec,
    )
}
