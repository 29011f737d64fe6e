//! Sampled gradient variances against the closed forms, for every case.

use plateau_core::analytic::{VarianceCase, VarianceQuery, c_constants_mc, variance_formula};
use plateau_core::linalg::{ComplexMatrix, gue_hermitian, haar_unitary, paulis};
use plateau_core::mc::{EnsembleSpec, MpsGradientConfig, ObservableSource, Sequential, grad_variance_mps, sample_rng};
use plateau_core::{HermitianObservable, UnitaryGate};

struct Setup {
    g: HermitianObservable,
    o: HermitianObservable,
    companion: UnitaryGate,
}

fn setup(bond_dim: usize, phys_dim: usize, seed: u64) -> Setup {
    let mut rng = sample_rng(seed, 0);
    let g = gue_hermitian(bond_dim * phys_dim, &mut rng);
    // keep a trace part so both observable moments matter
    let shift = ComplexMatrix::identity(phys_dim).scale_real(0.7);
    let o = HermitianObservable::new(gue_hermitian(phys_dim, &mut rng).matrix().add(&shift).unwrap()).unwrap();
    Setup { g, o, companion: haar_unitary(bond_dim * phys_dim, &mut rng) }
}

fn check(case: VarianceCase, n: usize, bond_dim: usize, phys_dim: usize, delta: usize, samples: usize, seed: u64) {
    let s = setup(bond_dim, phys_dim, seed);
    let companion = EnsembleSpec::fixed(s.companion.clone());
    let config = MpsGradientConfig::new(case, n, bond_dim, phys_dim, s.g.clone(), ObservableSource::Fixed(s.o.clone()))
        .with_delta(delta)
        .with_companion(companion.clone());
    let est = grad_variance_mps(&config, samples, seed + 100, &Sequential).unwrap();
    let cc = c_constants_mc(case, &s.g, &s.o, bond_dim, phys_dim, &companion, 2, 0, &Sequential).unwrap();
    let vq = VarianceQuery::new(case, n, bond_dim, phys_dim, delta, s.g, s.o).unwrap();
    let analytic = variance_formula(&vq, &cc).unwrap();
    let label = format!("{case} n={n} D={bond_dim} d={phys_dim} delta={delta}");
    assert!(est.mean_within(0.0, 3.0), "{label}: mean {} ± {}", est.mean, est.stderr_mean);
    assert!(
        (est.variance - analytic).abs() <= 3.0 * est.stderr_variance + 1e-12 * (1.0 + analytic.abs()),
        "{label}: sampled {} ± {} vs closed form {analytic}",
        est.variance,
        est.stderr_variance
    );
}

#[test]
fn every_case_matches_its_closed_form() {
    for (k, case) in VarianceCase::ALL.into_iter().enumerate() {
        check(case, 4, 2, 2, 1, 20_000, 10 + k as u64);
    }
}

#[test]
fn off_site_cases_at_larger_separation() {
    for (k, case) in [VarianceCase::OffSiteMinus, VarianceCase::OffSitePlus, VarianceCase::OffSiteBoth].into_iter().enumerate() {
        check(case, 5, 2, 2, 2, 20_000, 30 + k as u64);
        // last site: the chain between the observable and the derivative is empty
        check(case, 4, 2, 2, 3, 20_000, 40 + k as u64);
    }
}

#[test]
fn other_dimensions() {
    check(VarianceCase::OnSiteBoth, 3, 3, 2, 0, 20_000, 50);
    check(VarianceCase::OnSitePlus, 3, 2, 3, 0, 20_000, 51);
    check(VarianceCase::OffSiteMinus, 3, 1, 2, 1, 20_000, 52);
}

#[test]
fn haar_companion_uses_averaged_constants() {
    let (n, bond_dim, phys_dim) = (4, 2, 2);
    let g = HermitianObservable::new(paulis::pauli_string("ZI").unwrap()).unwrap();
    let o = HermitianObservable::from_diag(&[1.0, 0.0]);
    for (k, case) in [VarianceCase::OnSiteMinus, VarianceCase::OffSitePlus].into_iter().enumerate() {
        let ens = EnsembleSpec::haar(4);
        let config = MpsGradientConfig::new(case, n, bond_dim, phys_dim, g.clone(), ObservableSource::Fixed(o.clone()));
        let est = grad_variance_mps(&config, 20_000, 60 + k as u64, &Sequential).unwrap();
        let cc = c_constants_mc(case, &g, &o, bond_dim, phys_dim, &ens, 20_000, 70 + k as u64, &Sequential).unwrap();
        let vq = VarianceQuery::new(case, n, bond_dim, phys_dim, 1, g.clone(), o.clone()).unwrap();
        let analytic = variance_formula(&vq, &cc).unwrap();
        // propagate constant errors with a one-sided finite difference in each constant
        let mut spread = 0.0f64;
        for (id, c) in cc.iter() {
            let mut bumped = cc.clone();
            bumped.set(id, plateau_core::analytic::Constant { value: c.value + c.stderr, ..*c });
            spread += (variance_formula(&vq, &bumped).unwrap() - analytic).powi(2);
        }
        let combined = (est.stderr_variance.powi(2) + spread).sqrt();
        assert!((est.variance - analytic).abs() <= 3.0 * combined, "{case}: {} vs {analytic} (σ {combined})", est.variance);
    }
}

#[test]
fn pauli_companion_is_enough_for_zero_mean() {
    let g = HermitianObservable::new(paulis::pauli_string("XZ").unwrap()).unwrap();
    let o = HermitianObservable::new(paulis::z()).unwrap();
    for case in [VarianceCase::OnSiteMinus, VarianceCase::OnSitePlus] {
        let config = MpsGradientConfig::new(case, 4, 2, 2, g.clone(), ObservableSource::Fixed(o.clone()))
            .with_companion(EnsembleSpec::pauli_group(4));
        let est = grad_variance_mps(&config, 10_000, 80, &Sequential).unwrap();
        assert!(est.mean_within(0.0, 3.0), "{case}");
    }
}
