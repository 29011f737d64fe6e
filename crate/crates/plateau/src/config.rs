//! Settings from flags and an optional `key = value` file, and the presets
//! that turn setting strings into operators, ensembles and layouts.
//!
//! File schema: one `key = value` per line, `#` starts a comment. Keys are the
//! long flag names without dashes (`n`, `D`, `d`, `samples`, `c-samples`, ...).
//! Flags override the file; the seed falls back to `PLATEAU_SEED`, then 0.

use std::collections::BTreeMap;
use std::path::Path;

use plateau_core::circuit::CircuitLayout;
use plateau_core::linalg::{ComplexMatrix, gue_hermitian, haar_unitary, paulis};
use plateau_core::mc::{EnsembleSpec, sample_rng};
use plateau_core::{C64, HermitianObservable};

use crate::error::{CliError, config_err};

pub const SEED_ENV: &str = "PLATEAU_SEED";

/// Merged settings, echoed into every run record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses a config file body, rejecting keys outside `allowed`.
    pub fn parse_file(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config_err(format!("config line {}: expected `key = value`, got `{line}`", lineno + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(config_err(format!("config line {}: unknown key `{k}`", lineno + 1)));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(config_err(format!("config line {}: duplicate key `{k}`", lineno + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config file {}: {e}", p.display())))?;
                Self::parse_file(&text, allowed)
            }
        }
    }

    /// Flag values win over file values.
    pub fn overlay(&mut self, key: &str, flag: Option<String>) {
        if let Some(v) = flag {
            self.values.insert(key.to_string(), v);
        }
    }

    /// Value for `key`, recording `default` when nothing set it.
    pub fn get_or(&mut self, key: &str, default: &str) -> String {
        self.values.entry(key.to_string()).or_insert_with(|| default.to_string()).clone()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Seed from the settings, else the environment, else 0.
    pub fn resolve_seed(&mut self) -> Result<u64, CliError> {
        let raw = match self.get("seed") {
            Some(s) => s.to_string(),
            None => std::env::var(SEED_ENV).unwrap_or_else(|_| "0".into()),
        };
        let seed = raw.trim().parse::<u64>().map_err(|_| config_err(format!("seed must be a non-negative integer, got `{raw}`")))?;
        self.set("seed", seed.to_string());
        Ok(seed)
    }
}

/// Counts such as `10000`, `1e4` or `2.5e3`.
pub fn parse_count(key: &str, s: &str) -> Result<usize, CliError> {
    let s = s.trim();
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 1e15 => Ok(v as usize),
        _ => Err(config_err(format!("{key} must be a non-negative whole number, got `{s}`"))),
    }
}

/// `a:b` (inclusive) or a single value.
pub fn parse_range(key: &str, s: &str) -> Result<Vec<usize>, CliError> {
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (parse_count(key, a)?, parse_count(key, b)?),
        None => {
            let v = parse_count(key, s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(config_err(format!("{key} range `{s}` is empty (start above end)")));
    }
    Ok((lo..=hi).collect())
}

pub fn parse_list(key: &str, s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',').map(|x| parse_count(key, x)).collect()
}

/// `Z`, `X`, `Y`, `I`, `diag10`, `zero`, or `diag:a,b,...` on dimension `d`.
/// Single-qubit presets on `d = 2^k` act on the first qubit of the register.
pub fn parse_observable(s: &str, d: usize) -> Result<HermitianObservable, CliError> {
    let s = s.trim();
    if let Some(list) = s.strip_prefix("diag:") {
        let diag: Result<Vec<f64>, _> = list.split(',').map(|x| x.trim().parse::<f64>()).collect();
        let diag = diag.map_err(|_| config_err(format!("observable `{s}`: diagonal entries must be numbers")))?;
        if diag.len() != d {
            return Err(config_err(format!("observable `{s}` has {} entries, dimension is {d}", diag.len())));
        }
        return Ok(HermitianObservable::from_diag(&diag));
    }
    let single = match s {
        "zero" => return Ok(HermitianObservable::zero(d)),
        "I" => return Ok(HermitianObservable::identity(d)),
        "Z" => paulis::z(),
        "X" => paulis::x(),
        "Y" => paulis::y(),
        "diag10" => ComplexMatrix::from_diag(&[1.0, 0.0]),
        _ => {
            return Err(config_err(format!(
                "unknown observable `{s}` (use Z, X, Y, I, diag10, zero or diag:a,b,...)"
            )));
        }
    };
    if d < 2 || !d.is_power_of_two() {
        return Err(config_err(format!("observable `{s}` needs a qubit register, dimension is {d}")));
    }
    let rest = ComplexMatrix::identity(d / 2);
    Ok(HermitianObservable::new(plateau_core::linalg::kron(&single, &rest))?)
}

/// `gue:SEED`, `pauli:STRING`, `zero` or `identity` on dimension `dim`.
pub fn parse_generator(s: &str, dim: usize) -> Result<HermitianObservable, CliError> {
    let s = s.trim();
    if let Some(seed) = s.strip_prefix("gue:") {
        let seed = seed.parse::<u64>().map_err(|_| config_err(format!("generator `{s}`: seed must be an integer")))?;
        return Ok(gue_hermitian(dim, &mut sample_rng(seed, 0)));
    }
    if let Some(word) = s.strip_prefix("pauli:") {
        if 1usize.checked_shl(word.len() as u32) != Some(dim) {
            return Err(config_err(format!("generator `{s}` acts on dimension {}, site dimension is {dim}", 1usize << word.len().min(40))));
        }
        let m = paulis::pauli_string(word).map_err(|_| config_err(format!("generator `{s}`: letters must be I, X, Y or Z")))?;
        return Ok(HermitianObservable::new(m)?);
    }
    match s {
        "zero" => Ok(HermitianObservable::zero(dim)),
        "identity" => Ok(HermitianObservable::identity(dim)),
        _ => Err(config_err(format!("unknown generator `{s}` (use gue:SEED, pauli:ZI, zero or identity)"))),
    }
}

/// `haar`, `fixed:SEED` (one Haar draw frozen by the seed) or `pauli`.
pub fn parse_companion(s: &str, dim: usize) -> Result<EnsembleSpec, CliError> {
    let s = s.trim();
    if let Some(seed) = s.strip_prefix("fixed:") {
        let seed = seed.parse::<u64>().map_err(|_| config_err(format!("companion `{s}`: seed must be an integer")))?;
        return Ok(EnsembleSpec::fixed(haar_unitary(dim, &mut sample_rng(seed, 0))));
    }
    match s {
        "haar" => Ok(EnsembleSpec::haar(dim)),
        "pauli" => Ok(EnsembleSpec::pauli_group(dim)),
        _ => Err(config_err(format!("unknown companion ensemble `{s}` (use haar, fixed:SEED or pauli)"))),
    }
}

/// Layout file: `qubits = N` once, then one `gate q q ...` line per gate in
/// application order. `#` starts a comment.
pub fn parse_layout(text: &str) -> Result<CircuitLayout, CliError> {
    let mut qubits = None;
    let mut supports = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |m: String| config_err(format!("layout line {}: {m}", lineno + 1));
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() != "qubits" || qubits.is_some() {
                return Err(at(format!("unexpected `{line}`")));
            }
            qubits = Some(v.trim().parse::<usize>().map_err(|_| at(format!("bad qubit count `{}`", v.trim())))?);
            continue;
        }
        let mut words = line.split_whitespace();
        if words.next() != Some("gate") {
            return Err(at(format!("expected `gate q ...`, got `{line}`")));
        }
        let support: Result<Vec<usize>, _> = words.map(str::parse::<usize>).collect();
        let support = support.map_err(|_| at("qubit indices must be integers".into()))?;
        supports.push(support);
    }
    let n = qubits.ok_or_else(|| config_err("layout file lacks `qubits = N`"))?;
    CircuitLayout::new(n, supports).map_err(|e| config_err(format!("layout: {e}")))
}

pub fn parse_layout_file(path: &Path) -> Result<CircuitLayout, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read layout file {}: {e}", path.display())))?;
    parse_layout(&text)
}

/// A seeded random Hermitian, for default observable sets.
pub fn seeded_hermitian(dim: usize, seed: u64) -> HermitianObservable {
    gue_hermitian(dim, &mut sample_rng(seed, 1))
}

pub fn shifted(m: ComplexMatrix, shift: f64) -> Result<HermitianObservable, CliError> {
    let d = m.rows();
    let mut out = m;
    for i in 0..d {
        out[(i, i)] += C64::new(shift, 0.0);
    }
    Ok(HermitianObservable::new(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_ranges() {
        assert_eq!(parse_count("samples", "1e4").unwrap(), 10_000);
        assert_eq!(parse_count("samples", "250").unwrap(), 250);
        assert!(parse_count("samples", "1.5").is_err());
        assert!(parse_count("samples", "-3").is_err());
        assert_eq!(parse_range("n", "4:7").unwrap(), vec![4, 5, 6, 7]);
        assert_eq!(parse_range("n", "2").unwrap(), vec![2]);
        assert!(parse_range("n", "5:3").is_err());
    }

    #[test]
    fn file_parsing() {
        let s = Settings::parse_file("# comment\nn = 2:4\nsamples=1e3 # trailing\n\n", &["n", "samples"]).unwrap();
        assert_eq!(s.get("n"), Some("2:4"));
        assert_eq!(s.get("samples"), Some("1e3"));
        assert!(Settings::parse_file("bogus = 1", &["n"]).is_err());
        assert!(Settings::parse_file("n 3", &["n"]).is_err());
        assert!(Settings::parse_file("n = 1\nn = 2", &["n"]).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut s = Settings::parse_file("n = 2:4", &["n"]).unwrap();
        s.overlay("n", Some("3".into()));
        s.overlay("D", None);
        assert_eq!(s.get("n"), Some("3"));
        assert_eq!(s.get_or("D", "2"), "2");
        assert_eq!(s.get("D"), Some("2"));
    }

    #[test]
    fn presets() {
        assert_eq!(parse_observable("Z", 2).unwrap().trace_sq(), 2.0);
        assert_eq!(parse_observable("diag10", 2).unwrap().trace(), 1.0);
        assert_eq!(parse_observable("diag:1,2,3", 3).unwrap().trace(), 6.0);
        assert!(parse_observable("Z", 3).is_err());
        assert!(parse_observable("W", 2).is_err());
        assert_eq!(parse_generator("pauli:ZI", 4).unwrap().trace_sq(), 4.0);
        assert!(parse_generator("pauli:ZI", 8).is_err());
        assert_eq!(parse_generator("gue:3", 4).unwrap(), parse_generator("gue:3", 4).unwrap());
        assert!(parse_companion("fixed:1", 4).is_ok());
        assert!(parse_companion("clifford", 4).is_err());
    }

    #[test]
    fn layout_files() {
        let l = parse_layout("qubits = 3\ngate 0 1\ngate 1 2 # second\n").unwrap();
        assert_eq!(l.supports(), &[vec![0, 1], vec![1, 2]]);
        assert!(parse_layout("gate 0 1\n").is_err());
        assert!(parse_layout("qubits = 3\ngate 0 3\n").is_err());
        assert!(parse_layout("qubits = 3\ngate 0 0\n").is_err());
        assert!(parse_layout("qubits = 3\ngate a b\n").is_err());
        assert!(parse_layout("qubits = 3\nswap 0 1\n").is_err());
    }
}
