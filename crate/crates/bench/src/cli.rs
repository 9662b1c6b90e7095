//! Command-line front end. Flags override the matching config-file keys.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tomo_core::NoiseModel;

use crate::config::{parse_algorithms, ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::experiments::{self, Toolkit};
use crate::output;

#[derive(Debug, Parser)]
#[command(name = "tomo-bench", version, about = "Benchmark physical corrections of linear state tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infidelity against total counts N.
    SweepCounts(CommonArgs),
    /// Infidelity against state purity.
    SweepPurity(CommonArgs),
    /// Infidelity and runtime against qubit count.
    SweepQubits(CommonArgs),
    /// Derive the EO weighting curve from optimized distances.
    DeriveFit(CommonArgs),
    /// Reconstruct a state from a counts file.
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Multinomial,
}

impl From<NoiseArg> for NoiseModel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseModel::Gaussian,
            NoiseArg::Multinomial => NoiseModel::Multinomial,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON or TOML file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated subset of linear,sgs,eo,mle,imle.
    #[arg(long)]
    pub algos: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Weighting curve JSON replacing the built-in one.
    #[arg(long)]
    pub fit_curve: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Counts file to reconstruct from.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Density matrix to report the infidelity against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file (or the defaults of `kind`) with flags applied on top.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, kind)?,
            None => ExperimentConfig::for_kind(kind),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(a) = &self.algos {
            cfg.algorithms = parse_algorithms(a)?;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(f) = &self.fit_curve {
            cfg.fit_curve = Some(f.clone());
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(n) = self.noise {
            cfg.noise = n.into();
        }
        Ok(cfg)
    }
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::SweepCounts(_) => ExperimentKind::CountsSweep,
            Self::SweepPurity(_) => ExperimentKind::PuritySweep,
            Self::SweepQubits(_) => ExperimentKind::QubitSweep,
            Self::DeriveFit(_) => ExperimentKind::DeriveFit,
            Self::Reconstruct(_) => ExperimentKind::Reconstruct,
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let kind = self.kind();
        match self {
            Self::SweepCounts(a) | Self::SweepPurity(a) | Self::SweepQubits(a) | Self::DeriveFit(a) => a.resolve(kind),
            Self::Reconstruct(r) => {
                let mut cfg = r.common.resolve(kind)?;
                if let Some(i) = &r.input {
                    cfg.input = Some(i.clone());
                }
                if let Some(p) = &r.reference {
                    cfg.reference = Some(p.clone());
                }
                Ok(cfg)
            }
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| Path::new("results").join(cfg.kind.name()))
}

/// Runs the experiment described by `cfg` and writes its files. Returns the
/// paths written.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = out_dir(cfg);
    match cfg.kind {
        ExperimentKind::CountsSweep => output::write_sweep(&dir, cfg, &experiments::run_counts_sweep(cfg)?),
        ExperimentKind::PuritySweep => output::write_sweep(&dir, cfg, &experiments::run_purity_sweep(cfg)?),
        ExperimentKind::QubitSweep => output::write_sweep(&dir, cfg, &experiments::run_qubit_sweep(cfg)?),
        ExperimentKind::DeriveFit => output::write_derivation(&dir, cfg, &experiments::run_derive_fit(cfg)?),
        ExperimentKind::Reconstruct => {
            let toolkit = Toolkit::from_config(cfg)?;
            let input = cfg.input.as_deref().expect("validated");
            let report = experiments::reconstruct_file(input, cfg.algorithms[0], &toolkit.curve, cfg.reference.as_deref())?;
            output::write_reconstruction(&dir, cfg, &report)
        }
    }
}
