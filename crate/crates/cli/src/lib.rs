//! Suite orchestration and report generation for the `lcqft` binary.

pub mod config;
pub mod report;
pub mod suites;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use config::{ConfigError, RunConfig};
use report::{ClassificationJson, ConfigEcho, Float, Report, Status, SCHEMA};

/// Runs the selected suites, in parallel up to `cfg.jobs` threads. Suites
/// are reported in a fixed order whatever the scheduling.
pub fn run_suite(cfg: &RunConfig) -> Result<Report, ConfigError> {
    let st = cfg.spacetime()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    let suites = pool.install(|| {
        cfg.suites
            .par_iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(s.stream());
                let start = Instant::now();
                let mut r = suites::run(s, cfg, &st, &mut rng);
                r.timing_ms = Float(start.elapsed().as_secs_f64() * 1e3);
                r
            })
            .collect::<Vec<_>>()
    });
    let status = if suites.iter().all(|s| s.status == Status::Pass) { Status::Pass } else { Status::Fail };
    Ok(Report { schema: SCHEMA, version: env!("CARGO_PKG_VERSION"), seed: cfg.seed, config: echo(cfg), status, suites })
}

fn echo(cfg: &RunConfig) -> ConfigEcho {
    ConfigEcho {
        spectrum: cfg.spectrum.clone(),
        n_sites: cfg.n_sites,
        n_steps: cfg.n_steps,
        dt: Float(cfg.dt),
        seed: cfg.seed,
        suites: cfg.suites.iter().map(|s| s.name().to_string()).collect(),
        tolerances: cfg.tolerances.iter().map(|(k, &v)| (k.clone(), Float(v))).collect(),
    }
}

/// Output of `lcqft classify`: one classifier run, flattened to the top level.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassifyOutput {
    pub schema: &'static str,
    pub version: &'static str,
    pub config: ConfigEcho,
    pub status: Status,
    #[serde(flatten)]
    pub classification: ClassificationJson,
}

impl ClassifyOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub fn run_classify(cfg: &RunConfig) -> Result<Result<ClassifyOutput, lcqft::Error>, ConfigError> {
    let st = cfg.spacetime()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(config::Suite::Classify.stream());
    Ok(lcqft::classifier::classify(&mut rng, &st, true).map(|c| {
        let sound = c.soundness.max().max(c.reflections.max()) < cfg.tolerance("classify.soundness");
        let status = if c.matched && sound { Status::Pass } else { Status::Fail };
        ClassifyOutput {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            config: echo(cfg),
            status,
            classification: ClassificationJson::from(&c),
        }
    }))
}
