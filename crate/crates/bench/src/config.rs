//! Experiment configuration, loadable from JSON or TOML and overridable from
//! the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tomo_core::NoiseModel;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Linear,
    Sgs,
    Eo,
    Mle,
    Imle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Self::Linear, Self::Sgs, Self::Eo, Self::Mle, Self::Imle];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Sgs => "sgs",
            Self::Eo => "eo",
            Self::Mle => "mle",
            Self::Imle => "imle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BenchError::Config(format!("unknown algorithm `{s}` (expected linear, sgs, eo, mle or imle)")))
    }
}

/// Parses a comma-separated list such as `sgs,eo,mle`.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let mut algos = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let a: Algorithm = part.parse()?;
        if !algos.contains(&a) {
            algos.push(a);
        }
    }
    Ok(algos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CountsSweep,
    PuritySweep,
    QubitSweep,
    DeriveFit,
    Reconstruct,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::CountsSweep => "counts-sweep",
            Self::PuritySweep => "purity-sweep",
            Self::QubitSweep => "qubit-sweep",
            Self::DeriveFit => "derive-fit",
            Self::Reconstruct => "reconstruct",
        }
    }
}

/// How benchmark states are drawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    /// Target `Tr(rho^2)` for counts and qubit sweeps.
    pub purity: f64,
    pub zero_fraction: f64,
    pub rotation_strength: f64,
    /// Purity range sampled uniformly by the curve derivation.
    pub purity_range: [f64; 2],
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { purity: 0.94, zero_fraction: 0.25, rotation_strength: 0.1, purity_range: [0.5, 1.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Qubit count for counts and purity sweeps and the curve derivation.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub noise: NoiseModel,
    /// Total counts `N` per reconstruction for the counts sweep. Other
    /// experiments use `4^n * counts_per_element`.
    pub counts: Vec<f64>,
    pub counts_per_element: f64,
    pub purities: Vec<f64>,
    pub qubits: Vec<usize>,
    /// MLE is skipped above this qubit count.
    pub mle_max_qubits: usize,
    /// iMLE is skipped above this qubit count.
    pub imle_max_qubits: usize,
    /// Timed repetitions per algorithm and qubit count.
    pub timing_repeats: usize,
    /// Odd power-series terms for the derived curve.
    pub fit_terms: usize,
    pub state: StateConfig,
    pub out: Option<PathBuf>,
    pub fit_curve: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Count file for `reconstruct`.
    pub input: Option<PathBuf>,
    /// Reference density matrix for `reconstruct`.
    pub reference: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_kind(ExperimentKind::CountsSweep)
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            n: 2,
            trials: 200,
            seed: 42,
            algorithms: vec![Algorithm::Linear, Algorithm::Sgs, Algorithm::Eo, Algorithm::Mle, Algorithm::Imle],
            noise: NoiseModel::Gaussian,
            counts: vec![1e3, 10f64.powf(3.5), 1e4, 10f64.powf(4.5), 1e5, 10f64.powf(5.5), 1e6],
            counts_per_element: 1e3,
            purities: (0..=10).map(|k| 0.5 + 0.05 * k as f64).collect(),
            qubits: vec![2, 3, 4, 5],
            mle_max_qubits: 3,
            imle_max_qubits: 4,
            timing_repeats: 20,
            fit_terms: 6,
            state: StateConfig::default(),
            out: None,
            fit_curve: None,
            threads: None,
            input: None,
            reference: None,
        };
        match kind {
            ExperimentKind::PuritySweep => cfg.trials = 100,
            ExperimentKind::QubitSweep => cfg.trials = 50,
            ExperimentKind::DeriveFit => {
                cfg.n = 3;
                cfg.fit_terms = 4;
            }
            ExperimentKind::Reconstruct => cfg.algorithms = vec![Algorithm::Eo],
            ExperimentKind::CountsSweep => {}
        }
        cfg
    }

    /// Reads a JSON (`.json`) or TOML (anything else) file. Missing fields
    /// take the defaults of `kind`.
    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?
        } else {
            let table: toml::Value = toml::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
            serde_json::to_value(table).map_err(|e| BenchError::Config(e.to_string()))?
        };
        let defaults = serde_json::to_value(Self::for_kind(kind)).expect("config serializes");
        merge(&mut value, &defaults);
        let cfg: Self = serde_json::from_value(value).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        if cfg.kind != kind {
            return Err(BenchError::Config(format!(
                "config is for `{}` but the `{}` command was run",
                cfg.kind.name(),
                kind.name()
            )));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::Config(m));
        if self.algorithms.is_empty() {
            return fail("at least one algorithm is required".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.n == 0 || self.n > tomo_core::states::MAX_QUBITS {
            return fail(format!("n = {} is out of range", self.n));
        }
        if self.counts.is_empty() && self.kind == ExperimentKind::CountsSweep {
            return fail("counts sweep needs at least one N".into());
        }
        if let Some(bad) = self.counts.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return fail(format!("N must be positive, got {bad}"));
        }
        if !(self.counts_per_element > 0.0) {
            return fail("counts_per_element must be positive".into());
        }
        if let Some(bad) = self.purities.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return fail(format!("purity {bad} outside (0, 1]"));
        }
        if self.kind == ExperimentKind::PuritySweep && self.purities.is_empty() {
            return fail("purity sweep needs at least one purity".into());
        }
        if let Some(bad) = self.qubits.iter().find(|&&q| q == 0 || q > tomo_core::states::MAX_QUBITS) {
            return fail(format!("qubit count {bad} out of range"));
        }
        if self.kind == ExperimentKind::QubitSweep && self.qubits.is_empty() {
            return fail("qubit sweep needs at least one qubit count".into());
        }
        let [lo, hi] = self.state.purity_range;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return fail(format!("purity_range [{lo}, {hi}] is not a sub-range of (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.state.zero_fraction) {
            return fail(format!("zero_fraction {} outside [0, 1)", self.state.zero_fraction));
        }
        if self.fit_terms == 0 {
            return fail("fit_terms must be at least 1".into());
        }
        // An odd series pinned at index 0 sees 2^(n-1) independent points.
        if self.kind == ExperimentKind::DeriveFit && self.fit_terms > 1 << (self.n - 1) {
            return fail(format!("{} qubits support at most {} fit terms, got {}", self.n, 1 << (self.n - 1), self.fit_terms));
        }
        if self.timing_repeats == 0 {
            return fail("timing_repeats must be at least 1".into());
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if self.kind == ExperimentKind::Reconstruct {
            if self.input.is_none() {
                return fail("reconstruct needs a counts file".into());
            }
            if self.algorithms.len() != 1 {
                return fail("reconstruct takes exactly one algorithm".into());
            }
        }
        Ok(())
    }

    /// Total counts used by experiments that do not sweep `N`.
    pub fn total_counts_for(&self, n: usize) -> f64 {
        4f64.powi(n as i32) * self.counts_per_element
    }

    pub fn runs(&self, a: Algorithm) -> bool {
        self.algorithms.contains(&a)
    }

    /// Whether `a` is selected and within its qubit cap at `n` qubits.
    pub fn runs_at(&self, a: Algorithm, n: usize) -> bool {
        self.runs(a)
            && match a {
                Algorithm::Mle => n <= self.mle_max_qubits,
                Algorithm::Imle => n <= self.imle_max_qubits,
                _ => true,
            }
    }
}

/// Fills keys missing from `value` with those of `defaults`, recursively.
fn merge(value: &mut serde_json::Value, defaults: &serde_json::Value) {
    if let (Some(target), Some(source)) = (value.as_object_mut(), defaults.as_object()) {
        for (k, v) in source {
            match target.get_mut(k) {
                Some(existing) => merge(existing, v),
                None => {
                    target.insert(k.clone(), v.clone());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_lists() {
        assert_eq!(parse_algorithms("sgs, EO,sgs").unwrap(), vec![Algorithm::Sgs, Algorithm::Eo]);
        assert!(parse_algorithms("sgs,foo").is_err());
    }

    #[test]
    fn defaults_validate() {
        for kind in [ExperimentKind::CountsSweep, ExperimentKind::PuritySweep, ExperimentKind::QubitSweep, ExperimentKind::DeriveFit] {
            ExperimentConfig::for_kind(kind).validate().unwrap();
        }
        let mut cfg = ExperimentConfig::default();
        cfg.algorithms.clear();
        assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
    }

    #[test]
    fn toml_and_json_partial_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        std::fs::write(&toml_path, "kind = \"counts-sweep\"\ntrials = 7\nalgorithms = [\"sgs\"]\n[state]\npurity = 0.9\n").unwrap();
        let cfg = ExperimentConfig::load(&toml_path, ExperimentKind::CountsSweep).unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.algorithms, vec![Algorithm::Sgs]);
        assert_eq!(cfg.state.purity, 0.9);
        assert_eq!(cfg.state.zero_fraction, 0.25);

        let json_path = dir.path().join("c.json");
        std::fs::write(&json_path, r#"{"kind": "purity-sweep", "purities": [0.7, 0.9]}"#).unwrap();
        let cfg = ExperimentConfig::load(&json_path, ExperimentKind::PuritySweep).unwrap();
        assert_eq!(cfg.purities, vec![0.7, 0.9]);
        assert_eq!(cfg.trials, 100);

        std::fs::write(&json_path, r#"{"trails": 3}"#).unwrap();
        assert!(matches!(ExperimentConfig::load(&json_path, ExperimentKind::CountsSweep), Err(BenchError::Config(_))));
    }
}
