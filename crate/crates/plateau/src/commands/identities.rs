use plateau_core::HermitianObservable;
use plateau_core::analytic::design_constants;
use plateau_core::linalg::{ComplexMatrix, gue_hermitian};
use plateau_core::mc::{Executor, sample_rng};
use plateau_core::twirl::{PermLabel, mc_twirl, o_tree, perm_ops, second_moment, tree_chain, tree_diagram, tree_mc};

use crate::config::{Settings, parse_count, parse_observable};
use crate::error::{CliError, config_err};
use crate::record::{Cell, CheckLine, Outcome, Provenance, Table, col};

pub const KEYS: &[&str] = &["which", "D", "d", "samples", "O", "x", "seed", "workers", "format", "output"];

/// Agreement between the closed form and the diagram contraction.
pub const EXACT_TOL: f64 = 1e-10;
/// Max-entry error allowed between the exact and the sampled twirl.
pub const TWIRL_TOL: f64 = 5e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Twirl,
    Tree,
    OTree,
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TwirlInput {
    Identity,
    Swap,
    /// Unit-norm random Hermitian on the two-copy space.
    Random(u64),
}

#[derive(Clone, Debug)]
pub struct IdentitiesConfig {
    pub which: Which,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub samples: usize,
    pub observable: HermitianObservable,
    pub twirl_input: TwirlInput,
}

impl IdentitiesConfig {
    pub fn from_settings(s: &mut Settings) -> Result<Self, CliError> {
        let which = match s.get_or("which", "all").as_str() {
            "twirl" => Which::Twirl,
            "tree" => Which::Tree,
            "otree" => Which::OTree,
            "all" => Which::All,
            other => return Err(config_err(format!("which must be twirl, tree, otree or all, got `{other}`"))),
        };
        let bond_dim = parse_count("D", &s.get_or("D", "2"))?;
        let phys_dim = parse_count("d", &s.get_or("d", "2"))?;
        design_constants(bond_dim, phys_dim).map_err(|e| config_err(format!("D/d: {e}")))?;
        let samples = parse_count("samples", &s.get_or("samples", "1e5"))?;
        if samples < 2 {
            return Err(config_err("samples must be at least 2"));
        }
        let default_o = if phys_dim == 2 { "Z".to_string() } else { diag_first(phys_dim) };
        let observable = parse_observable(&s.get_or("O", &default_o), phys_dim)?;
        let x = s.get_or("x", "random:1");
        let twirl_input = match x.as_str() {
            "identity" => TwirlInput::Identity,
            "swap" => TwirlInput::Swap,
            r => match r.strip_prefix("random:").map(str::parse::<u64>) {
                Some(Ok(seed)) => TwirlInput::Random(seed),
                _ => return Err(config_err(format!("x must be identity, swap or random:SEED, got `{r}`"))),
            },
        };
        Ok(Self { which, bond_dim, phys_dim, samples, observable, twirl_input })
    }
}

fn diag_first(d: usize) -> String {
    let mut v = vec!["0"; d];
    v[0] = "1";
    format!("diag:{}", v.join(","))
}

pub fn columns() -> Vec<crate::record::Column> {
    vec![
        col("check", Provenance::Config),
        col("analytic", Provenance::ClosedForm),
        col("diagram", Provenance::Exact),
        col("mc", Provenance::Empirical),
        col("mc_stderr", Provenance::Empirical),
        col("error", Provenance::Empirical),
        col("tolerance", Provenance::Config),
        col("pass", Provenance::Config),
    ]
}

pub fn run<E: Executor + ?Sized>(cfg: &IdentitiesConfig, seed: u64, exec: &E) -> Result<Outcome, CliError> {
    let dc = design_constants(cfg.bond_dim, cfg.phys_dim)?;
    let mut out = Outcome::new("identities", Table::new(columns()));
    out.checks_gate = true;
    for (name, v) in [("q", dc.q), ("xi", dc.xi), ("eta", dc.eta)] {
        out.table.push(vec![Cell::Text(name.into()), v.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Flag(true)]);
    }
    let labels = [PermLabel::S, PermLabel::A];
    let trees = [(Which::Tree, None), (Which::OTree, Some(&cfg.observable))];
    for (k, (which, o)) in trees.into_iter().enumerate() {
        if cfg.which != which && cfg.which != Which::All {
            continue;
        }
        let prefix = if o.is_some() { "otree" } else { "tree" };
        for (i, &l) in labels.iter().enumerate() {
            for (j, &r) in labels.iter().enumerate() {
                let analytic = match o {
                    None => tree_chain(l, r, 1, &dc),
                    Some(o) => o_tree(l, r, o, &dc)?,
                };
                let diagram = tree_diagram(l, r, o, &dc)?;
                let stream = seed.wrapping_add((8 * k + 2 * i + j) as u64);
                let mc = tree_mc(l, r, o, &dc, cfg.samples, stream, exec)?;
                let exact_ok = (analytic - diagram).abs() <= EXACT_TOL * (1.0 + analytic.abs());
                let pass = exact_ok && mc.mean_within(analytic, 3.0);
                let name = format!("{prefix}({l},{r})");
                out.checks.push(CheckLine::new(
                    name.clone(),
                    pass,
                    format!("closed form {analytic:.6}, diagram {diagram:.6}, sampled {:.6} ± {:.2e}", mc.mean, mc.stderr_mean),
                ));
                out.table.push(vec![
                    Cell::Text(name),
                    analytic.into(),
                    diagram.into(),
                    mc.mean.into(),
                    mc.stderr_mean.into(),
                    (mc.mean - analytic).abs().into(),
                    (3.0 * mc.stderr_mean).into(),
                    Cell::Flag(pass),
                ]);
            }
        }
    }
    if matches!(cfg.which, Which::Twirl | Which::All) {
        let n = dc.site_dim();
        let x = twirl_input(&cfg.twirl_input, n);
        let exact = second_moment(&x, n)?;
        let mc = mc_twirl(&x, n, cfg.samples, seed.wrapping_add(64), exec)?;
        let err = exact.max_abs_diff(&mc);
        let pass = err <= TWIRL_TOL;
        out.checks.push(CheckLine::new("twirl", pass, format!("max entry error {err:.3e} (tolerance {TWIRL_TOL:e})")));
        out.table.push(vec![
            Cell::Text("twirl".into()),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            err.into(),
            TWIRL_TOL.into(),
            Cell::Flag(pass),
        ]);
    }
    Ok(out)
}

fn twirl_input(input: &TwirlInput, n: usize) -> ComplexMatrix {
    match input {
        TwirlInput::Identity => perm_ops(n).0.into_matrix(),
        TwirlInput::Swap => perm_ops(n).1.into_matrix(),
        TwirlInput::Random(seed) => gue_hermitian(n * n, &mut sample_rng(*seed, 2)).into_matrix(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use plateau_core::mc::Sequential;

    fn config(pairs: &[(&str, &str)]) -> IdentitiesConfig {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, v.to_string());
        }
        IdentitiesConfig::from_settings(&mut s).unwrap()
    }

    #[test]
    fn default_tree_values() {
        let cfg = config(&[("which", "tree"), ("samples", "2000")]);
        let out = run(&cfg, 1, &Sequential).unwrap();
        let analytic: Vec<f64> = out.table.rows[3..].iter().map(|r| match r[1] { Cell::Num(v) => v, _ => f64::NAN }).collect();
        assert_eq!(analytic.len(), 4);
        for (a, b) in analytic.iter().zip([1.0, 0.4, 0.0, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(out.failed_checks().is_empty());
    }

    #[test]
    fn other_dimensions_report_constants() {
        let cfg = config(&[("which", "tree"), ("D", "3"), ("samples", "500")]);
        let out = run(&cfg, 1, &Sequential).unwrap();
        assert_eq!(out.table.rows[1][1], Cell::Num(9.0 / 35.0));
        assert_eq!(out.table.rows[2][1], Cell::Num(16.0 / 35.0));
    }

    #[test]
    fn swap_twirls_exactly() {
        let cfg = config(&[("which", "twirl"), ("x", "swap"), ("samples", "50")]);
        let out = run(&cfg, 1, &Sequential).unwrap();
        let Cell::Num(err) = out.table.rows[3][5] else { panic!() };
        assert!(err < 1e-13);
    }

    #[test]
    fn rejects_bad_settings() {
        let mut s = Settings::default();
        s.set("which", "everything".into());
        assert!(IdentitiesConfig::from_settings(&mut s).is_err());
        let mut s = Settings::default();
        s.set("d", "1".into());
        assert!(IdentitiesConfig::from_settings(&mut s).is_err());
    }
}
