//! Command-line parsing and validated run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lcqft::lattice::{LatticeSpacetime, MassSpectrum};

/// Tolerance keys and their defaults. Overridable with `--tolerance KEY=VAL`.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("ccr.relations", 1e-12),
    ("ccr.associativity", 1e-10),
    ("gauge.homomorphism", 1e-11),
    ("gauge.naturality", 1e-12),
    ("rce.symplectic", 1e-10),
    ("rce.intertwining", 1e-9),
    ("rce.localization", 1e-10),
    ("rce.skew", 1e-8),
    ("rce.charge", 1e-9),
    ("classify.soundness", 1e-8),
    ("classify.affine", 1e-10),
    ("state.positivity", 1e-9),
    ("state.invariance", 1e-10),
    ("state.one_point", 1e-10),
    ("state.wick", 1e-12),
    ("observables.invariance", 1e-10),
    ("observables.mixing", 1e-3),
    ("observables.central", 1e-12),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum Suite {
    Ccr,
    Gauge,
    Rce,
    Classify,
    State,
    Observables,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [Suite::Ccr, Suite::Gauge, Suite::Rce, Suite::Classify, Suite::State, Suite::Observables];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ccr => "ccr",
            Suite::Gauge => "gauge",
            Suite::Rce => "rce",
            Suite::Classify => "classify",
            Suite::State => "state",
            Suite::Observables => "observables",
            Suite::All => "all",
        }
    }

    /// Random stream of the suite; fixed so that selecting a subset of
    /// suites does not change any of them.
    pub fn stream(self) -> u64 {
        Suite::EACH.iter().position(|&s| s == self).map_or(0, |i| i as u64 + 1)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lcqft", version, about = "Verification suites for the lattice free scalar field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run verification suites and emit a report.
    Verify {
        /// Suite to run (same as --suite).
        #[arg(value_enum)]
        which: Option<Suite>,
        #[arg(long, value_enum, conflicts_with = "which")]
        suite: Option<Suite>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Classify the infinitesimal symmetries of the classical theory.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Mass spectrum, `mass:multiplicity,...` in increasing mass order.
    #[arg(long, default_value = "1:2")]
    pub spectrum: String,
    #[arg(long, default_value_t = 8)]
    pub sites: usize,
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here (`-` for standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a tolerance, e.g. `--tolerance rce.skew=1e-7`.
    #[arg(long = "tolerance", value_name = "KEY=VAL")]
    pub tolerances: Vec<String>,
    /// Worker threads for running suites (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spectrum: String,
    pub n_sites: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub suites: Vec<Suite>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl RunConfig {
    /// Defaults with the given spectrum, size and suites.
    pub fn new(spectrum: &str, n_sites: usize, n_steps: usize, suites: &[Suite]) -> Self {
        Self {
            spectrum: spectrum.into(),
            n_sites,
            n_steps,
            dt: 0.5,
            seed: 0,
            tolerances: TOLERANCES.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            suites: expand(suites),
            out: None,
            jobs: 0,
        }
    }

    pub fn from_args(common: &CommonArgs, suites: &[Suite]) -> Result<Self, ConfigError> {
        let mut cfg = Self::new(&common.spectrum, common.sites, common.steps, suites);
        cfg.dt = common.dt;
        cfg.seed = common.seed;
        cfg.out = common.out.clone();
        cfg.jobs = common.jobs;
        for t in &common.tolerances {
            let (k, v) = t.split_once('=').ok_or_else(|| ConfigError(format!("tolerance '{t}' is not KEY=VAL")))?;
            let v: f64 = v.trim().parse().map_err(|_| ConfigError(format!("tolerance value '{v}' is not a number")))?;
            cfg.set_tolerance(k.trim(), v)?;
        }
        cfg.spacetime()?;
        Ok(cfg)
    }

    pub fn set_tolerance(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        match self.tolerances.get_mut(key) {
            Some(slot) if value.is_finite() && value > 0.0 => {
                *slot = value;
                Ok(())
            }
            Some(_) => Err(ConfigError(format!("tolerance {key} must be positive and finite"))),
            None => Err(ConfigError(format!("unknown tolerance key '{key}'"))),
        }
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances[key]
    }

    pub fn spacetime(&self) -> Result<Arc<LatticeSpacetime>, ConfigError> {
        let spectrum: MassSpectrum = self.spectrum.parse().map_err(|e| ConfigError(format!("{e}")))?;
        LatticeSpacetime::new(self.n_sites, self.n_steps, self.dt, spectrum)
            .map(Arc::new)
            .map_err(|e| ConfigError(format!("{e}")))
    }
}

fn expand(suites: &[Suite]) -> Vec<Suite> {
    let mut out: Vec<Suite> = if suites.is_empty() || suites.contains(&Suite::All) {
        Suite::EACH.to_vec()
    } else {
        suites.to_vec()
    };
    out.sort();
    out.dedup();
    out
}
