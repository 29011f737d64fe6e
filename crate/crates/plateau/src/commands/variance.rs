use plateau_core::analytic::{
    CConstants, ObservableMoments, VarianceCase, VarianceQuery, c_constants_mc, validate_geometry, variance_formula,
    variance_from_moments,
};
use plateau_core::costs::haar_avg_epsilon_xeb_closed;
use plateau_core::linalg::paulis;
use plateau_core::mc::{EnsembleSpec, Executor, MpsGradientConfig, ObservableSource, grad_variance_mps};
use plateau_core::{HermitianObservable, costs};

use crate::config::{Settings, parse_companion, parse_count, parse_generator, parse_observable, parse_range};
use crate::error::{CliError, config_err};
use crate::record::{Cell, Outcome, Provenance, Table, col, linear_fit};

pub const KEYS: &[&str] = &[
    "case", "n", "D", "d", "delta", "cost", "O", "G", "companion", "samples", "c-samples", "seed", "workers", "format", "output",
];

#[derive(Clone, Debug, PartialEq)]
pub enum CostChoice {
    Fixed(HermitianObservable),
    Xeb,
    Xent,
}

#[derive(Clone, Debug)]
pub struct VarianceConfig {
    pub case: VarianceCase,
    pub ns: Vec<usize>,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub delta: usize,
    pub cost: CostChoice,
    pub generator: HermitianObservable,
    pub companion: EnsembleSpec,
    pub samples: usize,
    /// Samples per Monte-Carlo constant.
    pub c_samples: usize,
}

impl VarianceConfig {
    pub fn from_settings(s: &mut Settings) -> Result<Self, CliError> {
        let case_s = s.get_or("case", "onsite-both");
        let case = VarianceCase::parse(&case_s).ok_or_else(|| {
            let names: Vec<_> = VarianceCase::ALL.iter().map(|c| c.name()).collect();
            config_err(format!("unknown case `{case_s}` (one of {})", names.join(", ")))
        })?;
        let ns = parse_range("n", &s.get_or("n", "2:6"))?;
        let bond_dim = parse_count("D", &s.get_or("D", "2"))?;
        let phys_dim = parse_count("d", &s.get_or("d", "2"))?;
        let delta = parse_count("delta", &s.get_or("delta", "1"))?;
        for &n in &ns {
            validate_geometry(case, n, bond_dim, phys_dim, delta).map_err(|e| config_err(format!("n={n}: {e}")))?;
        }
        let site = bond_dim * phys_dim;
        let cost = match s.get_or("cost", "fixed").as_str() {
            "fixed" => {
                let default_o = if phys_dim == 2 { "Z" } else { "diag10" };
                CostChoice::Fixed(parse_observable(&s.get_or("O", default_o), phys_dim)?)
            }
            "xeb" => CostChoice::Xeb,
            "xent" => CostChoice::Xent,
            other => return Err(config_err(format!("cost must be fixed, xeb or xent, got `{other}`"))),
        };
        if !matches!(cost, CostChoice::Fixed(_)) && phys_dim != 2 {
            return Err(config_err("target-derived costs need d = 2"));
        }
        let default_g = if site.is_power_of_two() && site >= 2 {
            format!("pauli:Z{}", "I".repeat(site.trailing_zeros() as usize - 1))
        } else {
            "gue:1".into()
        };
        let generator = parse_generator(&s.get_or("G", &default_g), site)?;
        let companion = parse_companion(&s.get_or("companion", "haar"), site)?;
        let samples = parse_count("samples", &s.get_or("samples", "1e4"))?;
        let c_samples = parse_count("c-samples", &s.get_or("c-samples", "1e4"))?;
        if samples < 2 || c_samples < 2 {
            return Err(config_err("samples and c-samples must be at least 2"));
        }
        Ok(Self { case, ns, bond_dim, phys_dim, delta, cost, generator, companion, samples, c_samples })
    }

    fn mps(&self, n: usize) -> MpsGradientConfig {
        let source = match &self.cost {
            CostChoice::Fixed(o) => ObservableSource::Fixed(o.clone()),
            CostChoice::Xeb => ObservableSource::LinearXeb,
            CostChoice::Xent => ObservableSource::CrossEntropy,
        };
        MpsGradientConfig::new(self.case, n, self.bond_dim, self.phys_dim, self.generator.clone(), source)
            .with_delta(self.delta)
            .with_companion(self.companion.clone())
    }
}

pub fn columns() -> Vec<crate::record::Column> {
    vec![
        col("n", Provenance::Config),
        col("var_emp", Provenance::Empirical),
        col("stderr", Provenance::Empirical),
        col("var_analytic", Provenance::Analytic),
        col("epsilon_mean", Provenance::Analytic),
        col("samples", Provenance::Config),
        col("seed", Provenance::Config),
    ]
}

/// Constants for the formula: closed form where the case allows, otherwise
/// sampled once and shared by every `n`.
fn constants<E: Executor + ?Sized>(
    cfg: &VarianceConfig,
    o: &HermitianObservable,
    seed: u64,
    exec: &E,
) -> Result<CConstants, CliError> {
    if matches!(cfg.case, VarianceCase::OnSiteBoth | VarianceCase::OffSiteBoth) {
        return Ok(CConstants::closed_form(&cfg.generator, cfg.bond_dim, cfg.phys_dim)?);
    }
    Ok(c_constants_mc(
        cfg.case,
        &cfg.generator,
        o,
        cfg.bond_dim,
        cfg.phys_dim,
        &cfg.companion,
        cfg.c_samples,
        seed,
        exec,
    )?)
}

pub fn run<E: Executor + ?Sized>(cfg: &VarianceConfig, seed: u64, exec: &E) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("variance", Table::new(columns()));
    // constants draw from a stream far from the per-n gradient seeds
    let c_seed = seed.wrapping_add(1 << 32);
    let placeholder;
    let o_for_constants = match &cfg.cost {
        CostChoice::Fixed(o) => o,
        _ => {
            placeholder = HermitianObservable::new(paulis::z())?;
            &placeholder
        }
    };
    let analytic_ok = !(cfg.cost == CostChoice::Xent || cfg.case == VarianceCase::OnSiteMinus && cfg.cost == CostChoice::Xeb);
    let cc = if analytic_ok { Some(constants(cfg, o_for_constants, c_seed, exec)?) } else { None };
    if let Some(cc) = &cc {
        for (id, c) in cc.iter() {
            out.notes.push(format!("{} = {:.6e} ± {:.1e} ({})", id.name(), c.value, c.stderr, c.provenance.name()));
        }
    }
    let mut fit_x = Vec::new();
    let mut fit_y = Vec::new();
    let mut excluded = 0;
    for &n in &cfg.ns {
        let run_seed = seed.wrapping_add(n as u64);
        let est = grad_variance_mps(&cfg.mps(n), cfg.samples, run_seed, exec)?;
        excluded += est.excluded;
        let (analytic, eps_mean) = match (&cfg.cost, &cc) {
            (CostChoice::Fixed(o), Some(cc)) => {
                let vq = VarianceQuery::new(cfg.case, n, cfg.bond_dim, cfg.phys_dim, cfg.delta, cfg.generator.clone(), o.clone())?;
                (Some(variance_formula(&vq, cc)?), Some(costs::epsilon(o, cfg.phys_dim)?))
            }
            (CostChoice::Xeb, cc) => {
                // the target observable is traceless, and the formula is linear in ε
                let eps = haar_avg_epsilon_xeb_closed(n as u32);
                let m = ObservableMoments { epsilon: eps, trace_sq: 0.0 };
                let v = match cc {
                    Some(cc) => Some(variance_from_moments(cfg.case, n, cfg.bond_dim, cfg.phys_dim, cfg.delta, cc, m)?),
                    None => None,
                };
                (v, Some(eps))
            }
            _ => (None, None),
        };
        if est.variance > 0.0 {
            fit_x.push(n as f64);
            fit_y.push(est.variance.ln());
        }
        out.table.push(vec![
            Cell::Int(n as u64),
            est.variance.into(),
            est.stderr_variance.into(),
            analytic.into(),
            eps_mean.into(),
            Cell::Int(est.samples as u64),
            Cell::Int(run_seed),
        ]);
    }
    if excluded > 0 {
        out.notes.push(format!("{excluded} clamped samples excluded"));
    }
    if let Some((slope, intercept)) = linear_fit(&fit_x, &fit_y) {
        out.summary.push(("ln_var_slope", slope, Provenance::Empirical));
        out.summary.push(("ln_var_intercept", intercept, Provenance::Empirical));
        out.notes.push(format!("ln Var slope over n: {slope:.4} (ln 2 = {:.4})", std::f64::consts::LN_2));
    }
    Ok(out)
}
