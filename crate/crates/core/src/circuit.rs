//! Layered qubit circuits with one differentiated gate and a local observable.
//!
//! Qubit 0 is the most significant bit of a basis index, and within a gate
//! the first listed qubit is the most significant. Gates run in list order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ansatz::{STATEVECTOR_CAP, real_part};
use crate::costs::epsilon;
use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, HermitianObservable, UnitaryGate, ZERO, expm_hermitian, haar_unitary};
use crate::mc::{EstimateResult, Executor, estimate};

/// Which qubits each gate acts on, in application order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitLayout {
    n_qubits: usize,
    supports: Vec<Vec<usize>>,
}

impl CircuitLayout {
    pub fn new(n_qubits: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Geometry("a circuit needs at least one qubit".into()));
        }
        let dim = 1usize.checked_shl(n_qubits as u32).filter(|&d| d <= STATEVECTOR_CAP);
        if dim.is_none() {
            return Err(Error::CapExceeded { dim: 1usize.checked_shl(n_qubits as u32).unwrap_or(usize::MAX), cap: STATEVECTOR_CAP });
        }
        for (k, s) in supports.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Geometry(format!("gate {k} acts on no qubits")));
            }
            for (i, &q) in s.iter().enumerate() {
                if q >= n_qubits {
                    return Err(Error::IndexOutOfRange { index: q, len: n_qubits });
                }
                if s[..i].contains(&q) {
                    return Err(Error::Geometry(format!("gate {k} lists qubit {q} twice")));
                }
            }
        }
        Ok(Self { n_qubits, supports })
    }

    /// Alternating nearest-neighbour pairs: layer `l` starts at qubit `l mod 2`.
    pub fn brick(n_qubits: usize, layers: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::Geometry(format!("brick layout needs at least 2 qubits, got {n_qubits}")));
        }
        let supports = (0..layers)
            .flat_map(|l| (l % 2..n_qubits - 1).step_by(2).map(|q| vec![q, q + 1]))
            .collect();
        Self::new(n_qubits, supports)
    }

    /// One gate on every qubit.
    pub fn full_single(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, vec![(0..n_qubits).collect()])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn gate_dim(&self, gate: usize) -> Result<usize> {
        self.supports
            .get(gate)
            .map(|s| 1usize << s.len())
            .ok_or(Error::IndexOutOfRange { index: gate, len: self.supports.len() })
    }

    /// A fresh Haar gate for every slot, drawn in list order.
    pub fn sample_haar<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> LayeredCircuit {
        let gates = self.supports.iter().map(|s| haar_unitary(1 << s.len(), rng)).collect();
        LayeredCircuit { layout: self.clone(), gates }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredCircuit {
    layout: CircuitLayout,
    gates: Vec<UnitaryGate>,
}

impl LayeredCircuit {
    pub fn new(layout: CircuitLayout, gates: Vec<UnitaryGate>) -> Result<Self> {
        if gates.len() != layout.len() {
            return Err(Error::Dimension(format!("{} gates for {} slots", gates.len(), layout.len())));
        }
        for (k, g) in gates.iter().enumerate() {
            let want = layout.gate_dim(k)?;
            if g.dim() != want {
                return Err(Error::Dimension(format!("gate {k} has dim {}, slot needs {want}", g.dim())));
            }
        }
        Ok(Self { layout, gates })
    }

    pub fn layout(&self) -> &CircuitLayout {
        &self.layout
    }

    pub fn gates(&self) -> &[UnitaryGate] {
        &self.gates
    }
}

/// Local observable on qubits `qubits`, placed right after gate `layer`.
///
/// Valid only if `layer`'s support contains every observed qubit and no later
/// gate touches them, so measuring at the end gives the same value. With no
/// layer, no gate may touch the observed qubits at all.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitObservable {
    pub qubits: Vec<usize>,
    pub layer: Option<usize>,
    pub o: HermitianObservable,
}

impl CircuitObservable {
    pub fn new(qubits: Vec<usize>, layer: usize, o: HermitianObservable) -> Self {
        Self { qubits, layer: Some(layer), o }
    }

    /// Observable on qubits that no gate acts on.
    pub fn untouched(qubits: Vec<usize>, o: HermitianObservable) -> Self {
        Self { qubits, layer: None, o }
    }

    pub fn validate(&self, layout: &CircuitLayout) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::Geometry("observable acts on no qubits".into()));
        }
        if self.o.dim() != 1 << self.qubits.len() {
            return Err(Error::Dimension(format!(
                "observable of dim {} on {} qubits",
                self.o.dim(),
                self.qubits.len()
            )));
        }
        let support = match self.layer {
            Some(l) => Some(layout.supports.get(l).ok_or(Error::IndexOutOfRange { index: l, len: layout.len() })?),
            None => None,
        };
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= layout.n_qubits {
                return Err(Error::IndexOutOfRange { index: q, len: layout.n_qubits });
            }
            if self.qubits[..i].contains(&q) {
                return Err(Error::Geometry(format!("observable lists qubit {q} twice")));
            }
            if let (Some(l), Some(s)) = (self.layer, support)
                && !s.contains(&q)
            {
                return Err(Error::Geometry(format!("gate {l} does not act on observed qubit {q}")));
            }
        }
        let first_free = self.layer.map_or(0, |l| l + 1);
        if let Some(k) = (first_free..layout.len()).find(|&k| layout.supports[k].iter().any(|q| self.qubits.contains(q))) {
            return Err(Error::Geometry(format!("gate {k} acts on observed qubits after the observable")));
        }
        Ok(())
    }

    /// `ε(O)` with the observed subsystem's dimension.
    pub fn epsilon(&self) -> Result<f64> {
        epsilon(&self.o, self.o.dim())
    }
}

/// Gate `gate` parameterised as `u_minus · exp(−iθG) · u_plus`; the circuit's
/// own matrix in that slot is ignored while the derivative is in use.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitDerivative {
    pub gate: usize,
    pub generator: HermitianObservable,
    pub u_minus: UnitaryGate,
    pub u_plus: UnitaryGate,
}

impl CircuitDerivative {
    pub fn new(gate: usize, generator: HermitianObservable, u_minus: UnitaryGate, u_plus: UnitaryGate) -> Self {
        Self { gate, generator, u_minus, u_plus }
    }

    pub fn validate(&self, layout: &CircuitLayout) -> Result<()> {
        let dim = layout.gate_dim(self.gate)?;
        for (what, d) in [("generator", self.generator.dim()), ("u_minus", self.u_minus.dim()), ("u_plus", self.u_plus.dim())] {
            if d != dim {
                return Err(Error::Dimension(format!("{what} of dim {d} on gate {} of dim {dim}", self.gate)));
            }
        }
        Ok(())
    }

    pub fn gate_at(&self, theta: f64) -> UnitaryGate {
        let rot = expm_hermitian(&self.generator, theta);
        let m = self.u_minus.matrix().matmul(rot.matrix()).and_then(|m| m.matmul(self.u_plus.matrix()));
        UnitaryGate::new_unchecked(m.expect("validated dims"))
    }
}

/// Applies `m` to `qubits` of an `n`-qubit state in place.
pub fn apply_local(state: &mut [C64], n: usize, qubits: &[usize], m: &ComplexMatrix) {
    let k = qubits.len();
    let dim = 1usize << k;
    debug_assert_eq!(m.rows(), dim);
    let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..dim)
        .map(|j| (0..k).filter(|&b| j >> (k - 1 - b) & 1 == 1).map(|b| masks[b]).sum())
        .collect();
    let mut local = vec![ZERO; dim];
    for base in 0..state.len() {
        if base & all != 0 {
            continue;
        }
        for (j, &off) in offsets.iter().enumerate() {
            local[j] = state[base + off];
        }
        for (i, &off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (j, &x) in local.iter().enumerate() {
                acc += m[(i, j)] * x;
            }
            state[base + off] = acc;
        }
    }
}

fn zero_state(n: usize) -> Vec<C64> {
    let mut psi = vec![ZERO; 1 << n];
    psi[0] = C64::new(1.0, 0.0);
    psi
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn expectation(psi: &[C64], n: usize, obs: &CircuitObservable) -> Result<f64> {
    let mut o_psi = psi.to_vec();
    apply_local(&mut o_psi, n, &obs.qubits, obs.o.matrix());
    real_part(inner(psi, &o_psi))
}

/// Output state of the circuit on `|0…0⟩`.
pub fn circuit_state(circ: &LayeredCircuit) -> Vec<C64> {
    let n = circ.layout.n_qubits;
    let mut psi = zero_state(n);
    for (s, g) in circ.layout.supports.iter().zip(&circ.gates) {
        apply_local(&mut psi, n, s, g.matrix());
    }
    psi
}

/// `⟨0|U† O U|0⟩`.
pub fn circuit_cost(circ: &LayeredCircuit, obs: &CircuitObservable) -> Result<f64> {
    obs.validate(&circ.layout)?;
    expectation(&circuit_state(circ), circ.layout.n_qubits, obs)
}

/// Cost with the differentiated slot set to `u_minus · exp(−iθG) · u_plus`.
pub fn circuit_cost_at(circ: &LayeredCircuit, deriv: &CircuitDerivative, obs: &CircuitObservable, theta: f64) -> Result<f64> {
    deriv.validate(&circ.layout)?;
    let mut gates = circ.gates.clone();
    gates[deriv.gate] = deriv.gate_at(theta);
    circuit_cost(&LayeredCircuit { layout: circ.layout.clone(), gates }, obs)
}

/// `∂C/∂θ` at `θ = 0`.
pub fn circuit_grad(circ: &LayeredCircuit, deriv: &CircuitDerivative, obs: &CircuitObservable) -> Result<f64> {
    let layout = &circ.layout;
    deriv.validate(layout)?;
    obs.validate(layout)?;
    let n = layout.n_qubits;
    let mut psi = zero_state(n);
    for k in 0..deriv.gate {
        apply_local(&mut psi, n, &layout.supports[k], circ.gates[k].matrix());
    }
    let site = &layout.supports[deriv.gate];
    apply_local(&mut psi, n, site, deriv.u_plus.matrix());
    let mut chi = psi.clone();
    apply_local(&mut chi, n, site, &deriv.generator.matrix().scale(C64::new(0.0, -1.0)));
    for v in [&mut psi, &mut chi] {
        apply_local(v, n, site, deriv.u_minus.matrix());
        for k in deriv.gate + 1..layout.len() {
            apply_local(v, n, &layout.supports[k], circ.gates[k].matrix());
        }
    }
    apply_local(&mut chi, n, &obs.qubits, obs.o.matrix());
    // ⟨ψ|O|χ⟩ is complex in general; only its real part enters
    Ok(2.0 * inner(&psi, &chi).re)
}

/// Central difference in `θ` with step `h`.
pub fn circuit_grad_fd(circ: &LayeredCircuit, deriv: &CircuitDerivative, obs: &CircuitObservable, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    Ok((circuit_cost_at(circ, deriv, obs, h)? - circuit_cost_at(circ, deriv, obs, -h)?) / (2.0 * h))
}

/// Gradient variance over Haar gates in every slot, with the differentiated
/// slot split into independent Haar `u_minus` and `u_plus`.
pub fn circuit_variance_mc<E: Executor + ?Sized>(
    layout: &CircuitLayout,
    deriv_gate: usize,
    generator: &HermitianObservable,
    obs: &CircuitObservable,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    obs.validate(layout)?;
    let dim = layout.gate_dim(deriv_gate)?;
    let probe = CircuitDerivative::new(deriv_gate, generator.clone(), UnitaryGate::identity(dim), UnitaryGate::identity(dim));
    probe.validate(layout)?;
    estimate(
        |_, rng| {
            let circ = layout.sample_haar(rng);
            let u_minus = haar_unitary(dim, rng);
            let u_plus = haar_unitary(dim, rng);
            let deriv = CircuitDerivative::new(deriv_gate, generator.clone(), u_minus, u_plus);
            circuit_grad(&circ, &deriv, obs).unwrap_or(f64::NAN)
        },
        samples,
        seed,
        exec,
    )
}
