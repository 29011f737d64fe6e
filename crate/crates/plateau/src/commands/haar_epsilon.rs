use plateau_core::costs::{TargetCost, haar_avg_epsilon_mc, haar_avg_epsilon_xeb_closed, haar_avg_trace_oe_sq_mc};
use plateau_core::mc::Executor;

use crate::config::{Settings, parse_count, parse_range};
use crate::error::{CliError, config_err};
use crate::record::{Cell, CheckLine, Outcome, Provenance, Table, col};

pub const KEYS: &[&str] = &["cost", "n", "samples", "seed", "workers", "format", "output"];

#[derive(Clone, Debug)]
pub struct HaarEpsilonConfig {
    pub cost: TargetCost,
    pub ns: Vec<usize>,
    pub samples: usize,
}

impl HaarEpsilonConfig {
    pub fn from_settings(s: &mut Settings) -> Result<Self, CliError> {
        let cost = match s.get_or("cost", "xeb").as_str() {
            "xeb" => TargetCost::Xeb,
            "xent" => TargetCost::Xent,
            other => return Err(config_err(format!("cost must be xeb or xent, got `{other}`"))),
        };
        let ns = parse_range("n", &s.get_or("n", "1:6"))?;
        if ns.iter().any(|&n| n == 0 || n > 24) {
            return Err(config_err("n must lie in 1..=24"));
        }
        let samples = parse_count("samples", &s.get_or("samples", "5000"))?;
        if samples < 2 {
            return Err(config_err("samples must be at least 2"));
        }
        Ok(Self { cost, ns, samples })
    }
}

pub fn columns() -> Vec<crate::record::Column> {
    vec![
        col("n", Provenance::Config),
        col("epsilon_mc", Provenance::Empirical),
        col("stderr", Provenance::Empirical),
        col("epsilon_closed", Provenance::ClosedForm),
        col("trace_oe_sq_mc", Provenance::Empirical),
        col("clamp_count", Provenance::Empirical),
    ]
}

/// Reports the sampled averages. Checks (agreement with the closed form for
/// the linear cost, monotone decay for the log cost) are informational.
pub fn run<E: Executor + ?Sized>(cfg: &HaarEpsilonConfig, seed: u64, exec: &E) -> Result<Outcome, CliError> {
    let mut out = Outcome::new("haar-epsilon", Table::new(columns()));
    let mut means = Vec::new();
    for &n in &cfg.ns {
        let s = seed.wrapping_add(n as u64);
        let est = haar_avg_epsilon_mc(cfg.cost, n, cfg.samples, s, exec)?;
        let (closed, trace_sq) = match cfg.cost {
            TargetCost::Xeb => {
                let c = haar_avg_epsilon_xeb_closed(n as u32);
                out.checks.push(CheckLine::new(
                    format!("n={n}"),
                    est.mean_within(c, 3.0),
                    format!("sampled {:.6} ± {:.1e}, closed form {c:.6}", est.mean, est.stderr_mean),
                ));
                (Some(c), None)
            }
            TargetCost::Xent => {
                let t = haar_avg_trace_oe_sq_mc(n, cfg.samples, s.wrapping_add(1 << 32), exec)?;
                (None, Some(t.mean))
            }
        };
        means.push((n, est.mean));
        out.table.push(vec![
            Cell::Int(n as u64),
            est.mean.into(),
            est.stderr_mean.into(),
            closed.into(),
            trace_sq.into(),
            Cell::Int(est.excluded as u64),
        ]);
        if est.excluded > 0 {
            let frac = est.excluded as f64 / (est.excluded + est.samples) as f64;
            out.notes.push(format!("n={n}: {} clamped samples excluded ({:.3}%)", est.excluded, 100.0 * frac));
        }
    }
    if cfg.cost == TargetCost::Xent {
        let monotone = means.windows(2).all(|w| w[1].1 <= w[0].1);
        out.checks.push(CheckLine::new("non-increasing", monotone, format!("{means:?}")));
    }
    Ok(out)
}
