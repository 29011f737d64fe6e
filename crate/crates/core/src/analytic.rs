//! Closed-form gradient variances for the MPS ansatz.
//!
//! The derivative sits on one site; the observable either shares that site or
//! sits `delta` sites further along the bond direction. Which of the two
//! factors around the derivative is Haar selects one of six formulas.

use alloc::format;
use alloc::vec::Vec;

use crate::costs::epsilon;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianObservable, UnitaryGate, commutator, kron, partial_trace};
use crate::mc::{EnsembleSpec, EstimateResult, Executor, estimate};
use crate::twirl::{DesignConstants, powi};

/// Which factor around the derivative is a 2-design, and whether the
/// observable shares the derivative's site.
///
/// `Minus` cases: the input-side factor (`u_plus`, next to the `|0⟩` input)
/// is Haar and the output-side factor comes from a companion ensemble.
/// `Plus` cases: the output-side factor (`u_minus`) is Haar and `u_plus` comes
/// from the companion ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarianceCase {
    OffSiteMinus,
    OffSitePlus,
    OffSiteBoth,
    OnSiteMinus,
    OnSitePlus,
    OnSiteBoth,
}

impl VarianceCase {
    pub const ALL: [VarianceCase; 6] = [
        VarianceCase::OffSiteMinus,
        VarianceCase::OffSitePlus,
        VarianceCase::OffSiteBoth,
        VarianceCase::OnSiteMinus,
        VarianceCase::OnSitePlus,
        VarianceCase::OnSiteBoth,
    ];

    pub fn is_on_site(self) -> bool {
        matches!(self, VarianceCase::OnSiteMinus | VarianceCase::OnSitePlus | VarianceCase::OnSiteBoth)
    }

    /// `u_plus` is Haar.
    pub fn input_side_is_design(self) -> bool {
        !matches!(self, VarianceCase::OffSitePlus | VarianceCase::OnSitePlus)
    }

    /// `u_minus` is Haar.
    pub fn output_side_is_design(self) -> bool {
        !matches!(self, VarianceCase::OffSiteMinus | VarianceCase::OnSiteMinus)
    }

    pub fn name(self) -> &'static str {
        match self {
            VarianceCase::OffSiteMinus => "offsite-minus",
            VarianceCase::OffSitePlus => "offsite-plus",
            VarianceCase::OffSiteBoth => "offsite-both",
            VarianceCase::OnSiteMinus => "onsite-minus",
            VarianceCase::OnSitePlus => "onsite-plus",
            VarianceCase::OnSiteBoth => "onsite-both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Constants the formula for this case reads.
    pub fn required(self) -> &'static [ConstantId] {
        use ConstantId::*;
        match self {
            VarianceCase::OffSiteMinus => &[C1],
            VarianceCase::OffSitePlus | VarianceCase::OnSitePlus => &[C2, C3],
            VarianceCase::OffSiteBoth | VarianceCase::OnSiteBoth => &[C4],
            VarianceCase::OnSiteMinus => &[C5, C6],
        }
    }
}

impl core::fmt::Display for VarianceCase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// `q`, `ξ`, `η` for a physical dimension of at least two.
pub fn design_constants(bond_dim: usize, phys_dim: usize) -> Result<DesignConstants> {
    if bond_dim < 1 || phys_dim < 2 {
        return Err(Error::InvalidParameter(format!("need D >= 1 and d >= 2 (got D={bond_dim}, d={phys_dim})")));
    }
    DesignConstants::new(bond_dim, phys_dim)
}

/// `Γ_L = (1 − η^L)/(1 − η)`.
pub fn gamma(len: usize, dc: &DesignConstants) -> Result<f64> {
    if !(dc.eta < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma needs eta < 1, got {}", dc.eta)));
    }
    Ok(dc.gamma(len as i64))
}

pub fn validate_geometry(case: VarianceCase, n: usize, bond_dim: usize, phys_dim: usize, delta: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Geometry(format!("need at least 2 sites, got n={n}")));
    }
    if bond_dim < 1 || phys_dim < 2 {
        return Err(Error::Geometry(format!("need D >= 1 and d >= 2 (got D={bond_dim}, d={phys_dim})")));
    }
    if !case.is_on_site() && !(1..n).contains(&delta) {
        return Err(Error::Geometry(format!("off-site cases need 1 <= delta <= n-1 (got delta={delta}, n={n})")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceQuery {
    pub case: VarianceCase,
    pub n: usize,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub delta: usize,
    pub g: HermitianObservable,
    pub o: HermitianObservable,
}

impl VarianceQuery {
    pub fn new(
        case: VarianceCase,
        n: usize,
        bond_dim: usize,
        phys_dim: usize,
        delta: usize,
        g: HermitianObservable,
        o: HermitianObservable,
    ) -> Result<Self> {
        let q = Self { case, n, bond_dim, phys_dim, delta, g, o };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        validate_geometry(self.case, self.n, self.bond_dim, self.phys_dim, self.delta)?;
        if self.g.dim() != self.bond_dim * self.phys_dim {
            return Err(Error::Dimension(format!(
                "generator of dim {} on site dim {}",
                self.g.dim(),
                self.bond_dim * self.phys_dim
            )));
        }
        if self.o.dim() != self.phys_dim {
            return Err(Error::Dimension(format!("observable of dim {} on physical dim {}", self.o.dim(), self.phys_dim)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstantId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
}

impl ConstantId {
    pub const ALL: [ConstantId; 6] =
        [ConstantId::C1, ConstantId::C2, ConstantId::C3, ConstantId::C4, ConstantId::C5, ConstantId::C6];

    pub fn name(self) -> &'static str {
        match self {
            ConstantId::C1 => "C1",
            ConstantId::C2 => "C2",
            ConstantId::C3 => "C3",
            ConstantId::C4 => "C4",
            ConstantId::C5 => "C5",
            ConstantId::C6 => "C6",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    MonteCarlo,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub provenance: Provenance,
}

impl Constant {
    pub fn closed(value: f64) -> Self {
        Self { value, stderr: 0.0, samples: 0, provenance: Provenance::ClosedForm }
    }
}

/// Generator- and observable-dependent constants; only those a case needs
/// are filled, except `C4` which is always available in closed form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CConstants {
    values: [Option<Constant>; 6],
}

impl CConstants {
    pub fn get(&self, id: ConstantId) -> Option<&Constant> {
        self.values[id.index()].as_ref()
    }

    pub fn set(&mut self, id: ConstantId, c: Constant) {
        self.values[id.index()] = Some(c);
    }

    pub fn value(&self, id: ConstantId) -> Result<f64> {
        self.get(id).map(|c| c.value).ok_or(Error::MissingConstant(id.name()))
    }

    /// Filled constants in order.
    pub fn iter(&self) -> impl Iterator<Item = (ConstantId, &Constant)> {
        ConstantId::ALL.into_iter().filter_map(|id| self.get(id).map(|c| (id, c)))
    }

    /// Constants holding only the closed-form `C4`.
    pub fn closed_form(g: &HermitianObservable, bond_dim: usize, phys_dim: usize) -> Result<Self> {
        let mut cc = Self::default();
        cc.set(ConstantId::C4, Constant::closed(c4_closed(g, bond_dim, phys_dim)?));
        Ok(cc)
    }
}

fn check_generator(g: &HermitianObservable, bond_dim: usize, phys_dim: usize) -> Result<()> {
    if g.dim() != bond_dim * phys_dim {
        return Err(Error::Dimension(format!("generator of dim {} for D={bond_dim}, d={phys_dim}", g.dim())));
    }
    Ok(())
}

/// `C4 = 2[−Tr(G)² + Dd·Tr(G²)]`.
pub fn c4_closed(g: &HermitianObservable, bond_dim: usize, phys_dim: usize) -> Result<f64> {
    check_generator(g, bond_dim, phys_dim)?;
    let t = g.trace();
    Ok(2.0 * (-t * t + (bond_dim * phys_dim) as f64 * g.trace_sq()))
}

/// Per-draw integrands of the non-closed constants, each without the leading 2.
pub struct Integrands<'a> {
    g: &'a HermitianObservable,
    o: &'a HermitianObservable,
    bond_dim: usize,
    phys_dim: usize,
    g_sq: ComplexMatrix,
    input_proj: ComplexMatrix,
    obs_site: ComplexMatrix,
    obs_sq: ComplexMatrix,
}

impl<'a> Integrands<'a> {
    pub fn new(g: &'a HermitianObservable, o: &'a HermitianObservable, bond_dim: usize, phys_dim: usize) -> Result<Self> {
        check_generator(g, bond_dim, phys_dim)?;
        if o.dim() != phys_dim {
            return Err(Error::Dimension(format!("observable of dim {} on physical dim {phys_dim}", o.dim())));
        }
        let id_bond = ComplexMatrix::identity(bond_dim);
        let proj0 = ComplexMatrix::from_fn(phys_dim, phys_dim, |i, j| {
            if i == 0 && j == 0 { crate::linalg::ONE } else { crate::linalg::ZERO }
        });
        Ok(Self {
            g,
            o,
            bond_dim,
            phys_dim,
            g_sq: g.matrix().matmul(g.matrix())?,
            input_proj: kron(&id_bond, &proj0),
            obs_site: kron(&id_bond, o.matrix()),
            obs_sq: o.matrix().matmul(o.matrix())?,
        })
    }

    fn conj_by(w: &UnitaryGate, m: &ComplexMatrix) -> ComplexMatrix {
        w.matrix().matmul(m).and_then(|x| x.matmul(&w.matrix().adjoint())).expect("site dims")
    }

    fn physical_part(&self, m: &ComplexMatrix) -> ComplexMatrix {
        partial_trace(m, &[self.bond_dim, self.phys_dim], &[1]).expect("site dims")
    }

    /// `−Tr_d[(Tr_D W G W†)²] + D·Tr(G²)`, over the output-side factor `W`.
    pub fn c1(&self, w: &UnitaryGate) -> f64 {
        let p = self.physical_part(&Self::conj_by(w, self.g.matrix()));
        -p.trace_product(&p).expect("square").re + self.bond_dim as f64 * self.g.trace_sq()
    }

    fn input_state(&self, w: &UnitaryGate) -> ComplexMatrix {
        Self::conj_by(w, &self.input_proj)
    }

    /// `−Tr(ρGρG) + Tr(G²ρ²)` with `ρ = W(I⊗|0⟩⟨0|)W†` over the input-side factor.
    pub fn c2(&self, w: &UnitaryGate) -> f64 {
        let rho = self.input_state(w);
        let rg = rho.matmul(self.g.matrix()).expect("site dims");
        let rho_sq = rho.matmul(&rho).expect("site dims");
        (-rg.trace_product(&rg).expect("square") + self.g_sq.trace_product(&rho_sq).expect("square")).re
    }

    /// `−Tr(ρG)² + D·Tr(ρG²)`.
    pub fn c3(&self, w: &UnitaryGate) -> f64 {
        let rho = self.input_state(w);
        let t = rho.trace_product(self.g.matrix()).expect("square").re;
        -t * t + self.bond_dim as f64 * rho.trace_product(&self.g_sq).expect("square").re
    }

    /// `Tr(σG[G,σ])` with `σ = W†(I⊗O)W` over the output-side factor.
    pub fn c5(&self, w: &UnitaryGate) -> f64 {
        let sigma = Self::conj_by(&w.adjoint(), &self.obs_site);
        let comm = commutator(self.g.matrix(), &sigma).expect("site dims");
        sigma.matmul(self.g.matrix()).and_then(|x| x.trace_product(&comm)).expect("site dims").re
    }

    /// `−Tr_d[(Tr_D(W G W†)·O)²] + D·Tr_d[Tr_D(W G² W†)·O²]`.
    pub fn c6(&self, w: &UnitaryGate) -> f64 {
        let p = self.physical_part(&Self::conj_by(w, self.g.matrix())).matmul(self.o.matrix()).expect("phys dims");
        let p2 = self.physical_part(&Self::conj_by(w, &self.g_sq));
        -p.trace_product(&p).expect("square").re
            + self.bond_dim as f64 * p2.trace_product(&self.obs_sq).expect("square").re
    }

    pub fn eval(&self, id: ConstantId, w: &UnitaryGate) -> f64 {
        match id {
            ConstantId::C1 => self.c1(w),
            ConstantId::C2 => self.c2(w),
            ConstantId::C3 => self.c3(w),
            ConstantId::C5 => self.c5(w),
            ConstantId::C6 => self.c6(w),
            ConstantId::C4 => {
                let t = self.g.trace();
                -t * t + (self.bond_dim * self.phys_dim) as f64 * self.g.trace_sq()
            }
        }
    }
}

/// Monte-Carlo estimates of the constants `case` needs, integrating over the
/// companion `ensemble` drawn for the non-Haar factor; `C4` is closed form.
#[allow(clippy::too_many_arguments)]
pub fn c_constants_mc<E: Executor + ?Sized>(
    case: VarianceCase,
    g: &HermitianObservable,
    o: &HermitianObservable,
    bond_dim: usize,
    phys_dim: usize,
    ensemble: &EnsembleSpec,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<CConstants> {
    let integrands = Integrands::new(g, o, bond_dim, phys_dim)?;
    ensemble.validate()?;
    if ensemble.dim != bond_dim * phys_dim {
        return Err(Error::Dimension(format!("ensemble of dim {} on site dim {}", ensemble.dim, bond_dim * phys_dim)));
    }
    let mut cc = CConstants::closed_form(g, bond_dim, phys_dim)?;
    let needed: Vec<ConstantId> = case.required().iter().copied().filter(|&id| id != ConstantId::C4).collect();
    for (k, &id) in needed.iter().enumerate() {
        // each constant gets its own seed offset but the same draws when k matches
        let est: EstimateResult = estimate(
            |_, rng| integrands.eval(id, &ensemble.sample(rng)),
            samples,
            seed.wrapping_add(k as u64),
            exec,
        )?;
        cc.set(
            id,
            Constant {
                value: 2.0 * est.mean,
                stderr: 2.0 * est.stderr_mean,
                samples: est.samples,
                provenance: Provenance::MonteCarlo,
            },
        );
    }
    Ok(cc)
}

/// Observable moments the formulas read: `ε(O)` and `Tr(O)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableMoments {
    pub epsilon: f64,
    pub trace_sq: f64,
}

impl ObservableMoments {
    pub fn of(o: &HermitianObservable) -> Result<Self> {
        let t = o.trace();
        Ok(Self { epsilon: epsilon(o, o.dim())?, trace_sq: t * t })
    }
}

struct Geometry {
    n: i64,
    delta: i64,
    big: f64,
    small: f64,
    dc: DesignConstants,
}

impl Geometry {
    fn new(case: VarianceCase, n: usize, bond_dim: usize, phys_dim: usize, delta: usize) -> Result<Self> {
        validate_geometry(case, n, bond_dim, phys_dim, delta)?;
        Ok(Self {
            n: n as i64,
            delta: delta as i64,
            big: bond_dim as f64,
            small: phys_dim as f64,
            dc: design_constants(bond_dim, phys_dim)?,
        })
    }

    fn eta_pow(&self, k: i64) -> f64 {
        powi(self.dc.eta, k)
    }

    /// `η^p·Γ_L`, kept finite when `L` is negative and `η = 0`.
    fn eta_pow_gamma(&self, p: i64, len: i64) -> f64 {
        (self.eta_pow(p) - self.eta_pow(p + len)) / (1.0 - self.dc.eta)
    }
}

/// Finite-`n` variance from the constants and the observable moments.
///
/// Not available for `OnSiteMinus`, whose constants already depend on `O`
/// beyond these two moments; use [`variance_formula`] there.
#[allow(clippy::too_many_arguments)]
pub fn variance_from_moments(
    case: VarianceCase,
    n: usize,
    bond_dim: usize,
    phys_dim: usize,
    delta: usize,
    cc: &CConstants,
    m: ObservableMoments,
) -> Result<f64> {
    let geo = Geometry::new(case, n, bond_dim, phys_dim, delta)?;
    let (n, delta, big, small, xi) = (geo.n, geo.delta, geo.big, geo.small, geo.dc.xi);
    let (eps, t1sq) = (m.epsilon, m.trace_sq);
    // prefactor·[ε(−1/d + DξΓ_L + D²η^L) + Tr(O)²(D²−1)η^L/d]
    let both = |prefactor: f64, len: i64| {
        prefactor
            * (eps * (-1.0 / small + big * xi * geo.dc.gamma(len) + big * big * geo.eta_pow(len))
                + t1sq * (big * big - 1.0) * geo.eta_pow(len) / small)
    };
    let plus = |p: i64, len: i64| -> Result<f64> {
        // η^p[ε(C2Dd² − C3 + (−C2d/D + C3d)(DξΓ_L + D²η^L)) + Tr(O)²(−C2/D + C3)(D²−1)η^L]
        let c2 = cc.value(ConstantId::C2)?;
        let c3 = cc.value(ConstantId::C3)?;
        let chain = big * xi * geo.eta_pow_gamma(p, len) + big * big * geo.eta_pow(p + len);
        Ok(eps * ((c2 * big * small * small - c3) * geo.eta_pow(p) + (-c2 * small / big + c3 * small) * chain)
            + t1sq * (-c2 / big + c3) * (big * big - 1.0) * geo.eta_pow(p + len))
    };
    let q2 = geo.dc.q * geo.dc.q;
    Ok(match case {
        VarianceCase::OnSiteBoth => both(cc.value(ConstantId::C4)? / q2, n - 1),
        VarianceCase::OffSiteBoth => both(cc.value(ConstantId::C4)? * geo.eta_pow(delta) / q2, n - delta - 1),
        VarianceCase::OffSiteMinus => both(cc.value(ConstantId::C1)? * geo.eta_pow(delta - 1) / q2, n - delta - 1),
        VarianceCase::OnSitePlus => plus(0, n - 2)? / q2,
        VarianceCase::OffSitePlus => plus(delta, n - delta - 2)? / q2,
        VarianceCase::OnSiteMinus => {
            return Err(Error::InvalidParameter(format!(
                "{case} depends on the observable through its constants; evaluate with variance_formula"
            )));
        }
    })
}

/// Finite-`n` closed-form variance for `vq.case`.
pub fn variance_formula(vq: &VarianceQuery, cc: &CConstants) -> Result<f64> {
    vq.validate()?;
    if vq.case == VarianceCase::OnSiteMinus {
        let geo = Geometry::new(vq.case, vq.n, vq.bond_dim, vq.phys_dim, vq.delta)?;
        let (c5, c6) = (cc.value(ConstantId::C5)?, cc.value(ConstantId::C6)?);
        let n = geo.n;
        return Ok((c5 * (-1.0 / (geo.big * geo.small) + geo.dc.xi * geo.dc.gamma(n - 1)) + c6 * geo.eta_pow(n - 1))
            / geo.dc.q);
    }
    variance_from_moments(vq.case, vq.n, vq.bond_dim, vq.phys_dim, vq.delta, cc, ObservableMoments::of(&vq.o)?)
}

/// The `n → ∞` limit of [`variance_formula`] at fixed `delta`.
pub fn variance_large_n(vq: &VarianceQuery, cc: &CConstants) -> Result<f64> {
    vq.validate()?;
    let geo = Geometry::new(vq.case, vq.n, vq.bond_dim, vq.phys_dim, vq.delta)?;
    let (big, small, dc, delta) = (geo.big, geo.small, geo.dc, geo.delta);
    let tail = big * dc.xi / (1.0 - dc.eta);
    let eps = ObservableMoments::of(&vq.o)?.epsilon;
    let q2 = dc.q * dc.q;
    Ok(match vq.case {
        VarianceCase::OnSiteBoth => eps * cc.value(ConstantId::C4)? / q2 * (-1.0 / small + tail),
        VarianceCase::OffSiteBoth => eps * cc.value(ConstantId::C4)? * geo.eta_pow(delta) / q2 * (-1.0 / small + tail),
        VarianceCase::OffSiteMinus => {
            eps * cc.value(ConstantId::C1)? * geo.eta_pow(delta - 1) / q2 * (-1.0 / small + tail)
        }
        VarianceCase::OffSitePlus | VarianceCase::OnSitePlus => {
            let (c2, c3) = (cc.value(ConstantId::C2)?, cc.value(ConstantId::C3)?);
            let p = if vq.case == VarianceCase::OnSitePlus { 0 } else { delta };
            eps * geo.eta_pow(p) / q2 * (c2 * big * small * small - c3 + (-c2 * small / big + c3 * small) * tail)
        }
        VarianceCase::OnSiteMinus => {
            cc.value(ConstantId::C5)? / dc.q * (-1.0 / (big * small) + dc.xi / (1.0 - dc.eta))
        }
    })
}

/// Large-`n` upper bound `ε(O)·4‖G‖²/q·(1 + Dd·ξ/(1−η))` for the on-site case
/// where only the input-side factor is a 2-design.
pub fn variance_bound_onsite_minus(vq: &VarianceQuery, g: &HermitianObservable) -> Result<f64> {
    vq.validate()?;
    if !vq.case.is_on_site() {
        return Err(Error::Geometry(format!("the on-site bound does not apply to {}", vq.case)));
    }
    let dc = design_constants(vq.bond_dim, vq.phys_dim)?;
    check_generator(g, vq.bond_dim, vq.phys_dim)?;
    let norm = crate::linalg::operator_norm(g);
    let eps = epsilon(&vq.o, vq.phys_dim)?;
    let site = (vq.bond_dim * vq.phys_dim) as f64;
    Ok(eps * 4.0 * norm * norm / dc.q * (1.0 + site * dc.xi / (1.0 - dc.eta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gue_hermitian, haar_unitary, paulis};
    use crate::mc::{Sequential, sample_rng};
    use approx::assert_abs_diff_eq;

    fn zi() -> HermitianObservable {
        HermitianObservable::new(paulis::pauli_string("ZI").unwrap()).unwrap()
    }

    fn z() -> HermitianObservable {
        HermitianObservable::new(paulis::z()).unwrap()
    }

    fn query(case: VarianceCase, n: usize, delta: usize, o: HermitianObservable) -> VarianceQuery {
        VarianceQuery::new(case, n, 2, 2, delta, zi(), o).unwrap()
    }

    #[test]
    fn design_constant_examples() {
        let dc = design_constants(2, 2).unwrap();
        assert_eq!((dc.q, dc.xi, dc.eta), (15.0, 0.4, 0.4));
        assert_eq!(design_constants(1, 2).unwrap().eta, 0.0);
        let dc = design_constants(3, 2).unwrap();
        assert_eq!(dc.q, 35.0);
        assert_abs_diff_eq!(dc.xi, 9.0 / 35.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dc.eta, 16.0 / 35.0, epsilon = 1e-15);
        assert!(design_constants(2, 1).is_err());
    }

    #[test]
    fn gamma_examples() {
        let dc = design_constants(2, 2).unwrap();
        assert_eq!(gamma(0, &dc).unwrap(), 0.0);
        assert_eq!(gamma(1, &dc).unwrap(), 1.0);
        assert_abs_diff_eq!(gamma(3, &dc).unwrap(), 1.56, epsilon = 1e-14);
        let bad = DesignConstants { eta: 1.0, ..dc };
        assert!(gamma(2, &bad).is_err());
    }

    #[test]
    fn c4_examples() {
        assert_eq!(c4_closed(&zi(), 2, 2).unwrap(), 32.0);
        assert_eq!(c4_closed(&HermitianObservable::identity(4), 2, 2).unwrap(), 0.0);
        assert_eq!(c4_closed(&HermitianObservable::zero(4), 2, 2).unwrap(), 0.0);
        assert!(c4_closed(&zi(), 3, 2).is_err());
    }

    #[test]
    fn onsite_both_plug_in() {
        let cc = CConstants::closed_form(&zi(), 2, 2).unwrap();
        let v = variance_formula(&query(VarianceCase::OnSiteBoth, 2, 1, z()), &cc).unwrap();
        assert_abs_diff_eq!(v, 32.0 / 225.0 * 2.0 * 1.9, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.5404444444444444, epsilon = 1e-12);
        let lim = variance_large_n(&query(VarianceCase::OnSiteBoth, 2, 1, z()), &cc).unwrap();
        assert_abs_diff_eq!(lim, 64.0 / 225.0 * 5.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn onsite_both_with_trace_term() {
        // O = |0⟩⟨0|: ε = 1/2, Tr(O)² = 1; n = 4: Γ₃ = 1.56, η³ = 0.064
        let cc = CConstants::closed_form(&zi(), 2, 2).unwrap();
        let o = HermitianObservable::from_diag(&[1.0, 0.0]);
        let v = variance_formula(&query(VarianceCase::OnSiteBoth, 4, 1, o), &cc).unwrap();
        let expect = 32.0 / 225.0 * (0.5 * (-0.5 + 0.8 * 1.56 + 4.0 * 0.064) + 3.0 * 0.064 / 2.0);
        assert_abs_diff_eq!(v, expect, epsilon = 1e-14);
    }

    #[test]
    fn missing_constants_are_reported() {
        let cc = CConstants::default();
        let r = variance_formula(&query(VarianceCase::OffSiteMinus, 4, 1, z()), &cc);
        assert_eq!(r, Err(Error::MissingConstant("C1")));
        let r = variance_formula(&query(VarianceCase::OnSiteMinus, 4, 1, z()), &cc);
        assert!(matches!(r, Err(Error::MissingConstant(_))));
    }

    #[test]
    fn geometry_rules() {
        assert!(VarianceQuery::new(VarianceCase::OffSiteBoth, 4, 2, 2, 0, zi(), z()).is_err());
        assert!(VarianceQuery::new(VarianceCase::OffSiteBoth, 4, 2, 2, 4, zi(), z()).is_err());
        assert!(VarianceQuery::new(VarianceCase::OffSiteBoth, 4, 2, 2, 3, zi(), z()).is_ok());
        assert!(VarianceQuery::new(VarianceCase::OnSiteBoth, 4, 2, 2, 0, zi(), z()).is_ok());
        assert!(VarianceQuery::new(VarianceCase::OnSiteBoth, 1, 2, 2, 0, zi(), z()).is_err());
        assert!(VarianceQuery::new(VarianceCase::OnSiteBoth, 4, 2, 2, 0, zi(), HermitianObservable::identity(3)).is_err());
    }

    fn all_constants(v: f64) -> CConstants {
        let mut cc = CConstants::default();
        for id in ConstantId::ALL {
            cc.set(id, Constant::closed(v));
        }
        cc
    }

    #[test]
    fn zero_observable_gives_zero() {
        let cc = all_constants(3.0);
        for case in VarianceCase::ALL {
            if case == VarianceCase::OnSiteMinus {
                continue;
            }
            let v = variance_formula(&query(case, 5, 2, HermitianObservable::zero(2)), &cc).unwrap();
            assert_eq!(v, 0.0, "{case}");
        }
    }

    #[test]
    fn offsite_both_is_shifted_onsite_both() {
        let cc = CConstants::closed_form(&zi(), 2, 2).unwrap();
        let o = HermitianObservable::new(paulis::x().add(&paulis::i2().scale_real(0.4)).unwrap()).unwrap();
        for n in 3..10 {
            for delta in 1..n - 1 {
                let off = variance_formula(&query(VarianceCase::OffSiteBoth, n, delta, o.clone()), &cc).unwrap();
                let on = variance_formula(&query(VarianceCase::OnSiteBoth, n - delta, 1, o.clone()), &cc).unwrap();
                assert!((off - 0.4f64.powi(delta as i32) * on).abs() < 1e-12 * on.abs().max(1.0));
            }
        }
    }

    #[test]
    fn offsite_plus_at_last_site_is_finite_for_product_states() {
        let g = HermitianObservable::new(paulis::x()).unwrap();
        let mut cc = CConstants::default();
        cc.set(ConstantId::C2, Constant::closed(1.3));
        cc.set(ConstantId::C3, Constant::closed(2.1));
        let vq = VarianceQuery::new(VarianceCase::OffSitePlus, 4, 1, 2, 3, g, z()).unwrap();
        assert_eq!(variance_formula(&vq, &cc).unwrap(), 0.0);
    }

    #[test]
    fn traceless_variance_is_proportional_to_epsilon() {
        let cc = all_constants(1.7);
        let mut rng = sample_rng(1, 0);
        for case in [VarianceCase::OnSiteBoth, VarianceCase::OffSiteBoth, VarianceCase::OffSiteMinus, VarianceCase::OnSitePlus, VarianceCase::OffSitePlus] {
            let mut ratio: Option<f64> = None;
            for _ in 0..5 {
                let h = gue_hermitian(2, &mut rng);
                let t = h.trace() / 2.0;
                let o = HermitianObservable::new(h.matrix().sub(&paulis::i2().scale_real(t)).unwrap()).unwrap();
                let vq = query(case, 6, 2, o.clone());
                let r = variance_formula(&vq, &cc).unwrap() / epsilon(&o, 2).unwrap();
                if let Some(prev) = ratio {
                    assert!(((r - prev) / prev).abs() < 1e-12, "{case}");
                }
                ratio = Some(r);
            }
        }
    }

    #[test]
    fn convergence_to_large_n() {
        let cc = all_constants(2.3);
        for case in VarianceCase::ALL {
            let delta = 2;
            let mut prev = f64::INFINITY;
            for n in delta + 2..30 {
                let vq = query(case, n, delta, z());
                let diff = (variance_formula(&vq, &cc).unwrap() - variance_large_n(&vq, &cc).unwrap()).abs();
                if n > delta + 2 {
                    assert!(diff < prev, "{case} n={n}");
                }
                prev = diff;
            }
            assert!(prev < 1e-9, "{case}: {prev}");
        }
    }

    #[test]
    fn identity_observable_large_n_vanishes() {
        let cc = CConstants::closed_form(&zi(), 2, 2).unwrap();
        let vq = query(VarianceCase::OnSiteBoth, 40, 1, HermitianObservable::identity(2));
        assert_eq!(variance_large_n(&vq, &cc).unwrap(), 0.0);
        assert!(variance_formula(&vq, &cc).unwrap() < 1e-14);
    }

    #[test]
    fn integrands_vanish_for_zero_generator() {
        let g = HermitianObservable::zero(4);
        let o = z();
        let it = Integrands::new(&g, &o, 2, 2).unwrap();
        let mut rng = sample_rng(2, 0);
        let w = haar_unitary(4, &mut rng);
        for id in ConstantId::ALL {
            assert_eq!(it.eval(id, &w), 0.0);
        }
        let cc = c_constants_mc(VarianceCase::OnSiteMinus, &g, &o, 2, 2, &EnsembleSpec::haar(4), 10, 1, &Sequential).unwrap();
        assert_eq!(cc.value(ConstantId::C5).unwrap(), 0.0);
        assert_eq!(cc.value(ConstantId::C6).unwrap(), 0.0);
    }

    #[test]
    fn input_side_constants_by_hand() {
        // W = I: ρ = I_D ⊗ |0⟩⟨0|
        let o = z();
        let id = UnitaryGate::identity(4);
        let gx = HermitianObservable::new(kron(&paulis::i2(), &paulis::x())).unwrap();
        let it = Integrands::new(&gx, &o, 2, 2).unwrap();
        // ρGρG = I⊗(P0 X P0 X) = 0, G²ρ² = I⊗P0
        assert_abs_diff_eq!(2.0 * it.c2(&id), 4.0, epsilon = 1e-14);
        // Tr(ρG) = 0, Tr(ρG²) = D
        assert_abs_diff_eq!(2.0 * it.c3(&id), 8.0, epsilon = 1e-14);
        let g = zi();
        let it = Integrands::new(&g, &o, 2, 2).unwrap();
        assert_abs_diff_eq!(2.0 * it.c2(&id), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(2.0 * it.c3(&id), 8.0, epsilon = 1e-14);
        let cc = c_constants_mc(VarianceCase::OnSitePlus, &gx, &o, 2, 2, &EnsembleSpec::fixed(id), 5, 0, &Sequential).unwrap();
        assert_abs_diff_eq!(cc.value(ConstantId::C2).unwrap(), 4.0, epsilon = 1e-14);
        assert_eq!(cc.get(ConstantId::C2).unwrap().stderr, 0.0);
        assert_eq!(cc.get(ConstantId::C4).unwrap().provenance, Provenance::ClosedForm);
        assert!(cc.get(ConstantId::C1).is_none());
    }

    #[test]
    fn haar_companion_reduces_to_c4() {
        // averaging the single-design constants over Haar reproduces the both-design formula
        let g = zi();
        let o = HermitianObservable::from_diag(&[1.0, 0.0]);
        for case in [VarianceCase::OffSiteMinus, VarianceCase::OffSitePlus, VarianceCase::OnSitePlus, VarianceCase::OnSiteMinus] {
            let cc = c_constants_mc(case, &g, &o, 2, 2, &EnsembleSpec::haar(4), 40_000, 5, &Sequential).unwrap();
            let both = if case.is_on_site() { VarianceCase::OnSiteBoth } else { VarianceCase::OffSiteBoth };
            let vq = query(case, 5, 2, o.clone());
            let v = variance_formula(&vq, &cc).unwrap();
            let reference = variance_formula(&query(both, 5, 2, o.clone()), &cc).unwrap();
            assert!(((v - reference) / reference).abs() < 0.03, "{case}: {v} vs {reference}");
        }
    }

    #[test]
    fn stderr_follows_sample_count() {
        let g = zi();
        let o = z();
        let ens = EnsembleSpec::haar(4);
        let se = |s| c_constants_mc(VarianceCase::OnSitePlus, &g, &o, 2, 2, &ens, s, 3, &Sequential).unwrap().get(ConstantId::C2).unwrap().stderr;
        let (a, b, c) = (se(1000), se(10_000), se(100_000));
        for r in [a / b, b / c] {
            assert!(r > 10f64.sqrt() / 1.5 && r < 10f64.sqrt() * 1.5, "{r}");
        }
    }

    #[test]
    fn onsite_minus_bound() {
        let mut rng = sample_rng(7, 0);
        let ens = EnsembleSpec::haar(4);
        for trial in 0..20 {
            let g = gue_hermitian(4, &mut rng);
            let o = gue_hermitian(2, &mut rng);
            let vq = VarianceQuery::new(VarianceCase::OnSiteMinus, 8, 2, 2, 0, g.clone(), o.clone()).unwrap();
            let cc = c_constants_mc(VarianceCase::OnSiteMinus, &g, &o, 2, 2, &ens, 2000, trial, &Sequential).unwrap();
            let v = variance_formula(&vq, &cc).unwrap();
            let dc = design_constants(2, 2).unwrap();
            let slack = 3.0 * (cc.get(ConstantId::C5).unwrap().stderr * (0.25 + dc.xi * dc.gamma(7))
                + cc.get(ConstantId::C6).unwrap().stderr * dc.eta.powi(7))
                / dc.q;
            assert!(variance_bound_onsite_minus(&vq, &g).unwrap() + slack >= v, "trial {trial}");
        }
        let vq = VarianceQuery::new(VarianceCase::OnSiteMinus, 8, 2, 2, 0, HermitianObservable::zero(4), z()).unwrap();
        assert_eq!(variance_bound_onsite_minus(&vq, &HermitianObservable::zero(4)).unwrap(), 0.0);
        let o2 = z().scale(2.0);
        let vq2 = VarianceQuery { o: o2, ..vq.clone() };
        let g = zi();
        let b1 = variance_bound_onsite_minus(&vq, &g).unwrap();
        let b2 = variance_bound_onsite_minus(&vq2, &g).unwrap();
        assert_abs_diff_eq!(b2, 4.0 * b1, epsilon = 1e-12);
    }
}
