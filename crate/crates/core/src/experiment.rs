//! Multi-seed experiments with per-seed artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run, EngineError};
use crate::eventlog::log_to_string;
use crate::metrics::{aggregate, compute_metrics, runs_csv, AggregateReport, MetricsError, RunMetrics};
use crate::scenario::ScenarioFile;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: EngineError,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Successful runs, ordered by seed.
    pub runs: Vec<RunMetrics>,
    pub failures: Vec<SeedFailure>,
    /// Absent when every seed failed.
    pub report: Option<AggregateReport>,
}

/// `count` consecutive seeds starting at `base`.
pub fn seed_range(base: u64, count: u64) -> Vec<u64> {
    (0..count).map(|i| base + i).collect()
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed:05}"))
}

enum SeedResult {
    Ok(RunMetrics),
    Failed(SeedFailure),
}

fn run_seed(scenario: &ScenarioFile, seed: u64, out: Option<&Path>) -> Result<SeedResult, ExperimentError> {
    let outcome = run(scenario, seed);
    let dir = out.map(|o| seed_dir(o, seed));
    if let Some(dir) = &dir {
        mkdir(dir)?;
        write(&dir.join("events.jsonl"), &log_to_string(&outcome.log))?;
    }
    if let Some(error) = outcome.error {
        if let Some(dir) = &dir {
            write(&dir.join("error.txt"), &format!("seed {seed}: {error}\n"))?;
        }
        return Ok(SeedResult::Failed(SeedFailure { seed, error }));
    }
    let m = compute_metrics(&outcome.log)?;
    if let Some(dir) = &dir {
        write(
            &dir.join("metrics.json"),
            &serde_json::to_string_pretty(&m).expect("metrics serialize"),
        )?;
        write(&dir.join("metrics.csv"), &m.to_csv())?;
    }
    Ok(SeedResult::Ok(m))
}

/// Run every seed (in parallel when `jobs > 1`), write artifacts under
/// `out` if given, and aggregate the successful runs. A failing seed is
/// reported with its id and does not stop the others.
pub fn run_experiment(
    scenario: &ScenarioFile,
    seeds: &[u64],
    out: Option<&Path>,
    jobs: usize,
) -> Result<ExperimentOutcome, ExperimentError> {
    if let Some(o) = out {
        mkdir(o)?;
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let results: Vec<Result<SeedResult, ExperimentError>> =
        pool.install(|| seeds.par_iter().map(|s| run_seed(scenario, *s, out)).collect());
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r? {
            SeedResult::Ok(m) => runs.push(m),
            SeedResult::Failed(f) => failures.push(f),
        }
    }
    let report = if runs.is_empty() { None } else { Some(aggregate(&runs)?) };
    if let Some(o) = out {
        write(&o.join("runs.csv"), &runs_csv(&runs))?;
        if let Some(rep) = &report {
            write(&o.join("aggregate.json"), &rep.to_json())?;
            write(&o.join("aggregate.txt"), &rep.to_text())?;
        }
        if !failures.is_empty() {
            let text: String = failures
                .iter()
                .map(|f| format!("seed {}: {}\n", f.seed, f.error))
                .collect();
            write(&o.join("failures.txt"), &text)?;
        }
    }
    Ok(ExperimentOutcome { runs, failures, report })
}
