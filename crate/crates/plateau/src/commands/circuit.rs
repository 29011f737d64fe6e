use plateau_core::circuit::{CircuitLayout, CircuitObservable, circuit_variance_mc};
use plateau_core::linalg::{kron_all, paulis};
use plateau_core::mc::Executor;
use plateau_core::{ComplexMatrix, HermitianObservable};

use crate::config::{Settings, parse_count, parse_generator, parse_layout_file, parse_list, parse_observable, seeded_hermitian, shifted};
use crate::error::{CliError, config_err};
use crate::record::{Cell, CheckLine, Outcome, Provenance, Table, col};

pub const KEYS: &[&str] = &[
    "layout", "layout-file", "qubits", "layers", "deriv-gate", "observe", "observe-layer", "G", "O", "samples", "seed", "workers",
    "format", "output",
];

/// Variances at or below this count as zero for observables with `ε = 0`.
pub const ZERO_VAR_TOL: f64 = 1e-20;

#[derive(Clone, Debug)]
pub struct NamedObservable {
    pub name: String,
    pub o: HermitianObservable,
}

#[derive(Clone, Debug)]
pub struct CircuitConfig {
    pub layout: CircuitLayout,
    pub deriv_gate: usize,
    pub generator: HermitianObservable,
    pub observed: Vec<usize>,
    pub observe_layer: Option<usize>,
    pub observables: Vec<NamedObservable>,
    pub samples: usize,
}

impl CircuitConfig {
    pub fn from_settings(s: &mut Settings) -> Result<Self, CliError> {
        let layout = match s.get("layout-file") {
            Some(path) => parse_layout_file(std::path::Path::new(path))?,
            None => match s.get_or("layout", "brick").as_str() {
                "brick" => {
                    let n = parse_count("qubits", &s.get_or("qubits", "4"))?;
                    let layers = parse_count("layers", &s.get_or("layers", "2"))?;
                    CircuitLayout::brick(n, layers).map_err(|e| config_err(format!("layout: {e}")))?
                }
                other => return Err(config_err(format!("layout must be brick (or give layout-file), got `{other}`"))),
            },
        };
        let deriv_gate = parse_count("deriv-gate", &s.get_or("deriv-gate", "0"))?;
        let dim = layout.gate_dim(deriv_gate).map_err(|e| config_err(format!("deriv-gate: {e}")))?;
        let generator = parse_generator(&s.get_or("G", "gue:1"), dim)?;
        let observed = parse_list("observe", &s.get_or("observe", "1"))?;
        let observe_layer = match s.get_or("observe-layer", "auto").as_str() {
            "auto" => last_touching(&layout, &observed),
            "none" => None,
            v => Some(parse_count("observe-layer", v)?),
        };
        let obs_dim = 1usize
            .checked_shl(observed.len() as u32)
            .filter(|_| observed.len() <= 12)
            .ok_or_else(|| config_err("too many observed qubits"))?;
        let observables = match s.get("O") {
            Some(list) => list
                .split(';')
                .map(|p| Ok(NamedObservable { name: p.trim().to_string(), o: parse_observable(p, obs_dim)? }))
                .collect::<Result<Vec<_>, CliError>>()?,
            None => default_observables(observed.len())?,
        };
        if observables.is_empty() {
            return Err(config_err("no observables given"));
        }
        let samples = parse_count("samples", &s.get_or("samples", "1e4"))?;
        if samples < 2 {
            return Err(config_err("samples must be at least 2"));
        }
        let cfg = Self { layout, deriv_gate, generator, observed, observe_layer, observables, samples };
        for named in &cfg.observables {
            cfg.placed(&named.o).validate(&cfg.layout).map_err(|e| config_err(format!("observable `{}`: {e}", named.name)))?;
        }
        Ok(cfg)
    }

    fn placed(&self, o: &HermitianObservable) -> CircuitObservable {
        CircuitObservable { qubits: self.observed.clone(), layer: self.observe_layer, o: o.clone() }
    }
}

fn last_touching(layout: &CircuitLayout, qubits: &[usize]) -> Option<usize> {
    layout.supports().iter().rposition(|s| s.iter().any(|q| qubits.contains(q)))
}

/// Five observables with different spectra: `Z`, `|0⟩⟨0|`, `X + Z/2`, a
/// seeded random one and `Y + 0.3 I`, each acting on the first observed qubit.
fn default_observables(k: usize) -> Result<Vec<NamedObservable>, CliError> {
    let pad = |m: ComplexMatrix| {
        let mut fs = vec![m];
        fs.extend((1..k).map(|_| ComplexMatrix::identity(2)));
        kron_all(&fs)
    };
    let x_plus_half_z = paulis::x().add(&paulis::z().scale_real(0.5))?;
    let presets = [
        ("Z", pad(paulis::z())),
        ("diag10", pad(ComplexMatrix::from_diag(&[1.0, 0.0]))),
        ("X+0.5Z", pad(x_plus_half_z)),
        ("random:7", pad(seeded_hermitian(2, 7).into_matrix())),
        ("Y+0.3I", pad(shifted(paulis::y(), 0.3)?.into_matrix())),
    ];
    presets
        .into_iter()
        .map(|(name, m)| Ok(NamedObservable { name: name.into(), o: HermitianObservable::new(m)? }))
        .collect()
}

pub fn columns() -> Vec<crate::record::Column> {
    vec![
        col("observable", Provenance::Config),
        col("epsilon", Provenance::Exact),
        col("grad_mean", Provenance::Empirical),
        col("grad_stderr", Provenance::Empirical),
        col("var_emp", Provenance::Empirical),
        col("var_stderr", Provenance::Empirical),
        col("ratio", Provenance::Empirical),
        col("ratio_stderr", Provenance::Empirical),
        col("samples", Provenance::Config),
        col("seed", Provenance::Config),
    ]
}

pub fn run<E: Executor + ?Sized>(cfg: &CircuitConfig, seed: u64, exec: &E) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("circuit", Table::new(columns()));
    out.checks_gate = true;
    // (name, ratio, stderr) for observables with ε > 0
    let mut ratios = Vec::new();
    for named in &cfg.observables {
        let obs = cfg.placed(&named.o);
        let eps = obs.epsilon()?;
        // the same seed for every observable shares the gate draws
        let est = circuit_variance_mc(&cfg.layout, cfg.deriv_gate, &cfg.generator, &obs, cfg.samples, seed, exec)?;
        let zero_mean = est.mean_within(0.0, 3.0);
        out.checks.push(CheckLine::new(
            format!("{}: zero mean", named.name),
            zero_mean,
            format!("mean {:.3e} ± {:.1e}", est.mean, est.stderr_mean),
        ));
        let (ratio, ratio_err) = if eps > 1e-14 {
            let (r, e) = (est.variance / eps, est.stderr_variance / eps);
            ratios.push((named.name.clone(), r, e));
            (Some(r), Some(e))
        } else {
            out.checks.push(CheckLine::new(
                format!("{}: zero variance", named.name),
                est.variance <= ZERO_VAR_TOL,
                format!("ε = 0, variance {:.3e}", est.variance),
            ));
            (None, None)
        };
        out.table.push(vec![
            Cell::Text(named.name.clone()),
            eps.into(),
            est.mean.into(),
            est.stderr_mean.into(),
            est.variance.into(),
            est.stderr_variance.into(),
            ratio.into(),
            ratio_err.into(),
            Cell::Int(est.samples as u64),
            Cell::Int(seed),
        ]);
    }
    for (i, a) in ratios.iter().enumerate() {
        for b in &ratios[i + 1..] {
            let sigma = (a.2 * a.2 + b.2 * b.2).sqrt();
            let diff = (a.1 - b.1).abs();
            out.checks.push(CheckLine::new(
                format!("ratio {} vs {}", a.0, b.0),
                diff <= 3.0 * sigma + 1e-12 * a.1.abs().max(b.1.abs()),
                format!("{:.5} vs {:.5}, {:.2} combined σ", a.1, b.1, if sigma > 0.0 { diff / sigma } else { 0.0 }),
            ));
        }
    }
    Ok(out)
}
