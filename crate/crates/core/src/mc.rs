//! Reproducible Monte-Carlo estimation.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, index)`, and
//! per-sample values are reduced in index order, so results do not depend on
//! how an [`Executor`] schedules the work.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::VarianceCase;
use crate::ansatz::{MpsAnsatz, SiteDecomposition, grad_site};
use crate::costs::{observable_xeb_from, observable_xent_from, p_first_qubit_from_state};
use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, HermitianObservable, UnitaryGate, haar_state, haar_unitary, weyl_operator};

/// Samples handled by one task.
pub const BLOCK: usize = 256;

/// Runs independent indexed tasks and returns their results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs tasks one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..tasks).map(f).collect()
    }
}

/// Random stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Split `0..samples` into fixed blocks and run `f` on each.
pub fn map_blocks<T, F, E>(samples: usize, exec: &E, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
    E: Executor + ?Sized,
{
    let tasks = samples.div_ceil(BLOCK);
    exec.map(tasks, |t| f(t * BLOCK..((t + 1) * BLOCK).min(samples)))
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Entrywise compensated sum of complex matrices.
#[derive(Clone, Debug)]
pub struct CompensatedMatrix {
    rows: usize,
    cols: usize,
    re: Vec<CompensatedSum>,
    im: Vec<CompensatedSum>,
}

impl CompensatedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            re: alloc::vec![CompensatedSum::default(); rows * cols],
            im: alloc::vec![CompensatedSum::default(); rows * cols],
        }
    }

    pub fn add(&mut self, m: &ComplexMatrix) {
        for (k, z) in m.as_slice().iter().enumerate() {
            self.re[k].add(z.re);
            self.im[k].add(z.im);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for k in 0..self.re.len() {
            self.re[k].add(other.re[k].sum);
            self.re[k].add(other.re[k].comp);
            self.im[k].add(other.im[k].sum);
            self.im[k].add(other.im[k].comp);
        }
    }

    pub fn value(&self) -> ComplexMatrix {
        let data = self.re.iter().zip(&self.im).map(|(r, i)| C64::new(r.value(), i.value())).collect();
        ComplexMatrix::from_vec(self.rows, self.cols, data).unwrap_or_else(|_| ComplexMatrix::zeros(self.rows, self.cols))
    }
}

/// Summary statistics of a Monte-Carlo run.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub stderr_mean: f64,
    /// Block jackknife standard error of `variance`.
    pub stderr_variance: f64,
    /// Samples that entered the averages.
    pub samples: usize,
    /// Samples drawn but dropped by the sampler.
    pub excluded: usize,
    pub seed: u64,
}

impl EstimateResult {
    /// Summary of already drawn values.
    pub fn from_values(values: &[f64], excluded: usize, seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 retained samples, got {n} ({excluded} excluded)"
            )));
        }
        let nf = n as f64;
        let mean = compensated_sum(values.iter().copied()) / nf;
        let dev_sum = compensated_sum(values.iter().map(|x| x - mean));
        let dev_sq = compensated_sum(values.iter().map(|x| (x - mean) * (x - mean)));
        let variance = ((dev_sq - dev_sum * dev_sum / nf) / (nf - 1.0)).max(0.0);
        Ok(Self {
            mean,
            variance,
            stderr_mean: libm::sqrt(variance / nf),
            stderr_variance: jackknife_variance_stderr(values, mean),
            samples: n,
            excluded,
            seed,
        })
    }

    /// Whether `value` lies within `k` standard errors of the mean, with an
    /// absolute floor for zero-spread estimates.
    pub fn mean_within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr_mean + 1e-12 * (1.0 + value.abs())
    }
}

/// Delete-one-block jackknife over at most 100 near-equal blocks.
fn jackknife_variance_stderr(values: &[f64], mean: f64) -> f64 {
    let n = values.len();
    let k = n.min(100);
    if n < 3 {
        return f64::INFINITY;
    }
    let mut s1 = Vec::with_capacity(k);
    let mut s2 = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    for b in 0..k {
        let block = &values[b * n / k..(b + 1) * n / k];
        s1.push(compensated_sum(block.iter().map(|x| x - mean)));
        s2.push(compensated_sum(block.iter().map(|x| (x - mean) * (x - mean))));
        sizes.push(block.len());
    }
    let t1 = compensated_sum(s1.iter().copied());
    let t2 = compensated_sum(s2.iter().copied());
    let leave_out: Vec<f64> = (0..k)
        .map(|b| {
            let m = (n - sizes[b]) as f64;
            let a = t1 - s1[b];
            ((t2 - s2[b]) - a * a / m) / (m - 1.0)
        })
        .collect();
    let kf = k as f64;
    let avg = compensated_sum(leave_out.iter().copied()) / kf;
    let spread = compensated_sum(leave_out.iter().map(|v| (v - avg) * (v - avg)));
    libm::sqrt((kf - 1.0) / kf * spread)
}

/// Estimate from a sampler that may drop samples (returning `None`).
pub fn estimate_filtered<F, E>(sampler: F, samples: usize, seed: u64, exec: &E) -> Result<EstimateResult>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Option<f64>> + Sync,
    E: Executor + ?Sized,
{
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("samples must be >= 2, got {samples}")));
    }
    let blocks = map_blocks(samples, exec, |range| {
        range
            .map(|i| {
                let mut rng = sample_rng(seed, i as u64);
                sampler(i, &mut rng)
            })
            .collect::<Vec<_>>()
    });
    let mut values = Vec::with_capacity(samples);
    let mut excluded = 0;
    for r in blocks.into_iter().flatten() {
        match r? {
            Some(v) => values.push(v),
            None => excluded += 1,
        }
    }
    EstimateResult::from_values(&values, excluded, seed)
}

/// Estimate the mean and variance of `sampler` over `samples` draws.
pub fn estimate<F, E>(sampler: F, samples: usize, seed: u64, exec: &E) -> Result<EstimateResult>
where
    F: Fn(usize, &mut ChaCha8Rng) -> f64 + Sync,
    E: Executor + ?Sized,
{
    estimate_filtered(|i, rng| Ok(Some(sampler(i, rng))), samples, seed, exec)
}

/// Distribution of unitaries on a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleKind {
    Haar,
    Fixed(UnitaryGate),
    /// Uniform over the Weyl operators `X^a Z^b`; a unitary 1-design.
    PauliGroup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
}

impl EnsembleSpec {
    pub fn haar(dim: usize) -> Self {
        Self { kind: EnsembleKind::Haar, dim }
    }

    pub fn fixed(gate: UnitaryGate) -> Self {
        Self { dim: gate.dim(), kind: EnsembleKind::Fixed(gate) }
    }

    pub fn pauli_group(dim: usize) -> Self {
        Self { kind: EnsembleKind::PauliGroup, dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("ensemble dimension must be positive".into()));
        }
        if let EnsembleKind::Fixed(g) = &self.kind
            && g.dim() != self.dim
        {
            return Err(Error::Dimension(format!("fixed gate of dim {} in ensemble of dim {}", g.dim(), self.dim)));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitaryGate {
        match &self.kind {
            EnsembleKind::Haar => haar_unitary(self.dim, rng),
            EnsembleKind::Fixed(g) => g.clone(),
            EnsembleKind::PauliGroup => {
                let a = rng.random_range(0..self.dim);
                let b = rng.random_range(0..self.dim);
                weyl_operator(self.dim, a, b)
            }
        }
    }
}

/// Where the measured observable comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSource {
    Fixed(HermitianObservable),
    /// Linear cross-entropy observable of a fresh Haar target per sample.
    LinearXeb,
    /// Cross-entropy observable of a fresh Haar target per sample; clamped
    /// samples are excluded.
    CrossEntropy,
}

/// Gradient sampling setup for the MPS ansatz.
#[derive(Clone, Debug)]
pub struct MpsGradientConfig {
    pub case: VarianceCase,
    pub n: usize,
    pub bond_dim: usize,
    pub phys_dim: usize,
    /// Sites between the derivative and the observable; ignored on-site.
    pub delta: usize,
    pub g: HermitianObservable,
    pub observable: ObservableSource,
    /// Ensemble for the factor that is not a 2-design in single-design cases.
    pub companion: EnsembleSpec,
}

impl MpsGradientConfig {
    pub fn new(case: VarianceCase, n: usize, bond_dim: usize, phys_dim: usize, g: HermitianObservable, observable: ObservableSource) -> Self {
        Self { case, n, bond_dim, phys_dim, delta: 1, g, observable, companion: EnsembleSpec::haar(bond_dim * phys_dim) }
    }

    pub fn with_delta(mut self, delta: usize) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_companion(mut self, companion: EnsembleSpec) -> Self {
        self.companion = companion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        crate::analytic::validate_geometry(self.case, self.n, self.bond_dim, self.phys_dim, self.delta)?;
        let site = self.bond_dim * self.phys_dim;
        if self.g.dim() != site {
            return Err(Error::Dimension(format!("generator of dim {} on site dim {site}", self.g.dim())));
        }
        if self.companion.dim != site {
            return Err(Error::Dimension(format!("companion ensemble of dim {} on site dim {site}", self.companion.dim)));
        }
        self.companion.validate()?;
        match &self.observable {
            ObservableSource::Fixed(o) if o.dim() != self.phys_dim => {
                Err(Error::Dimension(format!("observable of dim {} on physical dim {}", o.dim(), self.phys_dim)))
            }
            ObservableSource::LinearXeb | ObservableSource::CrossEntropy if self.phys_dim != 2 => Err(
                Error::InvalidParameter(format!("target-derived observables need d = 2, got {}", self.phys_dim)),
            ),
            ObservableSource::LinearXeb | ObservableSource::CrossEntropy if self.n > 24 => {
                Err(Error::CapExceeded { dim: 1 << self.n.min(63), cap: 1 << 24 })
            }
            _ => Ok(()),
        }
    }

    /// Site carrying the observable when the derivative sits at site 0.
    pub fn observable_site(&self) -> usize {
        if self.case.is_on_site() { 0 } else { self.delta }
    }

    /// Gradient for one sample, or `None` when the observable had to be clamped.
    pub fn sample_gradient<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<f64>> {
        let site = self.bond_dim * self.phys_dim;
        let mut gates = Vec::with_capacity(self.n);
        gates.push(UnitaryGate::identity(site));
        for _ in 1..self.n {
            gates.push(haar_unitary(site, rng));
        }
        let (u_minus, u_plus) = if self.case.output_side_is_design() && self.case.input_side_is_design() {
            let a = haar_unitary(site, rng);
            (a, haar_unitary(site, rng))
        } else if self.case.input_side_is_design() {
            let out = self.companion.sample(rng);
            (out, haar_unitary(site, rng))
        } else {
            let out = haar_unitary(site, rng);
            (out, self.companion.sample(rng))
        };
        let o = match &self.observable {
            ObservableSource::Fixed(o) => o.clone(),
            ObservableSource::LinearXeb => {
                let psi = haar_state(1 << self.n, rng);
                observable_xeb_from(&p_first_qubit_from_state(&psi, self.n)?).matrix
            }
            ObservableSource::CrossEntropy => {
                let psi = haar_state(1 << self.n, rng);
                let obs = observable_xent_from(&p_first_qubit_from_state(&psi, self.n)?);
                if obs.clamped {
                    return Ok(None);
                }
                obs.matrix
            }
        };
        let ansatz = MpsAnsatz::new(self.n, self.bond_dim, self.phys_dim, gates)?;
        let dec = SiteDecomposition::new(0, u_minus, self.g.clone(), u_plus)?;
        grad_site(&ansatz, &dec, &o, self.observable_site()).map(Some)
    }
}

/// Mean and variance of the site gradient over the configured ensembles.
pub fn grad_variance_mps<E: Executor + ?Sized>(
    config: &MpsGradientConfig,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<EstimateResult> {
    config.validate()?;
    estimate_filtered(|_, rng| config.sample_gradient(rng), samples, seed, exec)
}

/// Sum of a complex iterator with compensation on both parts.
pub fn compensated_complex_sum(xs: impl IntoIterator<Item = C64>) -> C64 {
    let mut re = CompensatedSum::default();
    let mut im = CompensatedSum::default();
    for z in xs {
        re.add(z.re);
        im.add(z.im);
    }
    C64::new(re.value(), im.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    /// Spreads blocks over tasks in reverse to mimic an out-of-order pool.
    struct Reversed;

    impl Executor for Reversed {
        fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
        where
            T: Send,
            F: Fn(usize) -> T + Sync,
        {
            let mut out: Vec<(usize, T)> = (0..tasks).rev().map(|t| (t, f(t))).collect();
            out.sort_by_key(|(t, _)| *t);
            out.into_iter().map(|(_, v)| v).collect()
        }
    }

    #[test]
    fn constant_sampler() {
        let r = estimate(|_, _| 2.5, 1000, 1, &Sequential).unwrap();
        assert_eq!(r.mean, 2.5);
        assert_eq!(r.variance, 0.0);
        assert_eq!(r.stderr_mean, 0.0);
        assert_eq!(r.stderr_variance, 0.0);
    }

    #[test]
    fn normal_sampler_clt() {
        let r = estimate(|_, rng| rng.sample::<f64, _>(StandardNormal), 100_000, 7, &Sequential).unwrap();
        // one fixed draw: 4σ keeps the false-alarm rate negligible
        assert!(r.mean.abs() <= 4.0 * r.stderr_mean);
        assert!((r.variance - 1.0).abs() <= 4.0 * r.stderr_variance);
        assert!(r.stderr_variance > 0.0 && r.stderr_variance < 0.02);
    }

    #[test]
    fn schedule_does_not_change_results() {
        let f = |i: usize, rng: &mut ChaCha8Rng| rng.random::<f64>() + i as f64 * 1e-3;
        let a = estimate(f, 3000, 5, &Sequential).unwrap();
        let b = estimate(f, 3000, 5, &Reversed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn exclusions_are_counted() {
        let r = estimate_filtered(|i, _| Ok((i % 10 != 0).then_some(i as f64)), 100, 0, &Sequential).unwrap();
        assert_eq!((r.samples, r.excluded), (90, 10));
        assert!(estimate(|_, _| 0.0, 1, 0, &Sequential).is_err());
    }

    #[test]
    fn two_samples_leave_jackknife_undefined() {
        let r = estimate(|i, _| i as f64, 2, 0, &Sequential).unwrap();
        assert_eq!(r.variance, 0.5);
        assert!(r.stderr_variance.is_infinite());
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let f = |_: usize, rng: &mut ChaCha8Rng| rng.random::<f64>();
        let small = estimate(f, 1000, 3, &Sequential).unwrap();
        let large = estimate(f, 100_000, 3, &Sequential).unwrap();
        let ratio = small.stderr_mean / large.stderr_mean;
        assert!(ratio > 10.0 / 1.5 && ratio < 10.0 * 1.5, "{ratio}");
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn ensembles_sample_expected_kinds() {
        let mut rng = sample_rng(1, 0);
        let fixed = UnitaryGate::identity(4);
        assert_eq!(EnsembleSpec::fixed(fixed.clone()).sample(&mut rng), fixed);
        let p = EnsembleSpec::pauli_group(4).sample(&mut rng);
        assert!(UnitaryGate::new(p.into_matrix()).is_ok());
        let bad = EnsembleSpec { kind: EnsembleKind::Fixed(fixed), dim: 2 };
        assert!(bad.validate().is_err());
    }
}
