//! Flag parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{circuit, haar_epsilon, identities, variance};
use crate::config::{Settings, parse_count};
use crate::error::{CliError, config_err};
use crate::executor::Threaded;
use crate::record::Outcome;

#[derive(Parser, Debug)]
#[command(name = "plateau", version, about = "Gradient-variance experiments for sequential MPS-style ansätze")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Base seed; defaults to $PLATEAU_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads, 0 for one per core. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<String>,
    /// `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Re-run on one worker and require byte-identical numbers.
    #[arg(long, global = true)]
    pub verify: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Design constants, tree values and the exact twirl against sampling.
    Identities(IdentitiesArgs),
    /// Gradient variance over n against the closed form.
    Variance(VarianceArgs),
    /// Haar average of ε for target-derived observables.
    HaarEpsilon(HaarEpsilonArgs),
    /// Gradient variance of a layered qubit circuit for several observables.
    Circuit(CircuitArgs),
}

#[derive(Args, Debug, Default)]
pub struct IdentitiesArgs {
    /// twirl, tree, otree or all.
    #[arg(long)]
    pub which: Option<String>,
    #[arg(long = "D")]
    pub bond_dim: Option<String>,
    #[arg(long = "d")]
    pub phys_dim: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    /// Observable for the observable trees.
    #[arg(long = "O")]
    pub o: Option<String>,
    /// Twirl input: identity, swap or random:SEED.
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct VarianceArgs {
    /// onsite-both, onsite-minus, onsite-plus, offsite-both, offsite-minus, offsite-plus.
    #[arg(long)]
    pub case: Option<String>,
    /// Site counts, `a:b` or a single value.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long = "D")]
    pub bond_dim: Option<String>,
    #[arg(long = "d")]
    pub phys_dim: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    /// fixed, xeb or xent.
    #[arg(long)]
    pub cost: Option<String>,
    #[arg(long = "O")]
    pub o: Option<String>,
    /// Generator: gue:SEED, pauli:ZI, zero or identity.
    #[arg(long = "G")]
    pub g: Option<String>,
    /// Ensemble of the non-design factor: haar, fixed:SEED or pauli.
    #[arg(long)]
    pub companion: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    /// Samples per sampled constant.
    #[arg(long = "c-samples")]
    pub c_samples: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct HaarEpsilonArgs {
    /// xeb or xent.
    #[arg(long)]
    pub cost: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct CircuitArgs {
    /// Built-in layout (brick).
    #[arg(long)]
    pub layout: Option<String>,
    /// Layout file with `qubits = N` and `gate q ...` lines.
    #[arg(long = "layout-file")]
    pub layout_file: Option<String>,
    #[arg(long)]
    pub qubits: Option<String>,
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long = "deriv-gate")]
    pub deriv_gate: Option<String>,
    /// Observed qubits, comma separated.
    #[arg(long)]
    pub observe: Option<String>,
    /// Gate after which the observable is read: an index, auto or none.
    #[arg(long = "observe-layer")]
    pub observe_layer: Option<String>,
    #[arg(long = "G")]
    pub g: Option<String>,
    /// Observable; repeat for several.
    #[arg(long = "O")]
    pub o: Vec<String>,
    #[arg(long)]
    pub samples: Option<String>,
}

/// A finished command with the settings it resolved.
pub struct Run {
    pub outcome: Outcome,
    pub settings: Settings,
    pub seed: u64,
    pub format: Format,
}

impl Command {
    fn allowed_keys(&self) -> &'static [&'static str] {
        match self {
            Command::Identities(_) => identities::KEYS,
            Command::Variance(_) => variance::KEYS,
            Command::HaarEpsilon(_) => haar_epsilon::KEYS,
            Command::Circuit(_) => circuit::KEYS,
        }
    }

    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        match self {
            Command::Identities(a) => vec![
                ("which", a.which.clone()),
                ("D", a.bond_dim.clone()),
                ("d", a.phys_dim.clone()),
                ("samples", a.samples.clone()),
                ("O", a.o.clone()),
                ("x", a.x.clone()),
            ],
            Command::Variance(a) => vec![
                ("case", a.case.clone()),
                ("n", a.n.clone()),
                ("D", a.bond_dim.clone()),
                ("d", a.phys_dim.clone()),
                ("delta", a.delta.clone()),
                ("cost", a.cost.clone()),
                ("O", a.o.clone()),
                ("G", a.g.clone()),
                ("companion", a.companion.clone()),
                ("samples", a.samples.clone()),
                ("c-samples", a.c_samples.clone()),
            ],
            Command::HaarEpsilon(a) => vec![("cost", a.cost.clone()), ("n", a.n.clone()), ("samples", a.samples.clone())],
            Command::Circuit(a) => vec![
                ("layout", a.layout.clone()),
                ("layout-file", a.layout_file.clone()),
                ("qubits", a.qubits.clone()),
                ("layers", a.layers.clone()),
                ("deriv-gate", a.deriv_gate.clone()),
                ("observe", a.observe.clone()),
                ("observe-layer", a.observe_layer.clone()),
                ("G", a.g.clone()),
                ("O", (!a.o.is_empty()).then(|| a.o.join(";"))),
                ("samples", a.samples.clone()),
            ],
        }
    }
}

/// Merges file and flags, runs the command, and returns the outcome.
/// `workers_override` replaces the configured worker count (used by `--verify`).
pub fn execute(cli: &Cli, workers_override: Option<usize>) -> Result<Run, CliError> {
    let mut settings = Settings::load(cli.global.config.as_deref(), cli.command.allowed_keys())?;
    settings.overlay("seed", cli.global.seed.clone());
    settings.overlay("workers", cli.global.workers.clone());
    settings.overlay("format", cli.global.format.map(|f| format_name(f).to_string()));
    settings.overlay("output", cli.global.output.as_ref().map(|p| p.display().to_string()));
    for (k, v) in cli.command.flags() {
        settings.overlay(k, v);
    }
    let seed = settings.resolve_seed()?;
    let workers = match workers_override {
        Some(w) => w,
        None => parse_count("workers", &settings.get_or("workers", "0"))?,
    };
    let format = match settings.get_or("format", "csv").as_str() {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return Err(config_err(format!("format must be csv or json, got `{other}`"))),
    };
    let exec = Threaded::new(workers).map_err(|e| config_err(format!("cannot start {workers} workers: {e}")))?;
    let outcome = match &cli.command {
        Command::Identities(_) => identities::run(&identities::IdentitiesConfig::from_settings(&mut settings)?, seed, &exec)?,
        Command::Variance(_) => variance::run(&variance::VarianceConfig::from_settings(&mut settings)?, seed, &exec)?,
        Command::HaarEpsilon(_) => haar_epsilon::run(&haar_epsilon::HaarEpsilonConfig::from_settings(&mut settings)?, seed, &exec)?,
        Command::Circuit(_) => circuit::run(&circuit::CircuitConfig::from_settings(&mut settings)?, seed, &exec)?,
    };
    Ok(Run { outcome, settings, seed, format })
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}
