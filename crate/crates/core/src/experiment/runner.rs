use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::results::{read_results, rows_from_history, write_atomic, write_results, ResultRow};
use crate::driver::{run, Strategy};
use crate::error::{Error, Result};
use crate::problems::Problem;

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "TWOSTAGE_BO_OUTPUT";

/// Output root from the environment, or the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub strategy: Strategy,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    /// Merged, sorted rows of every completed cell.
    pub results_path: PathBuf,
    /// Cells run by this call, as opposed to found on disk.
    pub computed: Vec<(Strategy, u64)>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

fn cell_path(dir: &Path, strategy: Strategy, seed: u64) -> PathBuf {
    dir.join("cells").join(format!("{}-{seed}.csv", strategy.name()))
}

/// Runs every (strategy, replicate) cell of the experiment that has no
/// result file yet, using at most `parallelism` threads.
///
/// Layout under the output directory: `config.toml` (resolved
/// configuration), `cells/<strategy>-<seed>.csv` (one file per finished
/// cell, written atomically), `cells/<strategy>-<seed>.err` (the error of a
/// failed cell) and `results.csv` (all cells merged, rewritten at the end).
pub fn run_experiment(cfg: &ExperimentConfig, parallelism: usize, root: &Path) -> Result<ExperimentOutcome> {
    let dir = if cfg.output_dir.is_absolute() { cfg.output_dir.clone() } else { root.join(&cfg.output_dir) };
    let cells_dir = dir.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;

    let pending: Vec<(u64, Vec<Strategy>)> = cfg
        .seeds()
        .map(|seed| (seed, cfg.strategies.iter().copied().filter(|&s| !cell_path(&dir, s, seed).exists()).collect::<Vec<_>>()))
        .filter(|(_, s)| !s.is_empty())
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<(Strategy, u64, Result<()>)> = pool.install(|| {
        pending
            .par_iter()
            .flat_map(|(seed, strategies)| {
                // One instance per seed so the reference optimum is shared.
                let problem = Problem::build(&cfg.problem, *seed);
                strategies
                    .par_iter()
                    .map(|&strategy| {
                        let outcome = problem.as_ref().map_err(clone_error).and_then(|p| run_cell(cfg, p, strategy, *seed, &dir));
                        (strategy, *seed, outcome)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    });

    let mut computed = Vec::new();
    let mut failures = Vec::new();
    for (strategy, seed, outcome) in results {
        computed.push((strategy, seed));
        let err_path = cell_path(&dir, strategy, seed).with_extension("err");
        match outcome {
            Ok(()) => {
                let _ = std::fs::remove_file(&err_path);
            }
            Err(e) => {
                log::error!("{} seed {seed}: {e}", strategy);
                write_atomic(&err_path, e.to_string().as_bytes())?;
                failures.push(CellFailure { strategy, seed, message: e.to_string() });
            }
        }
    }
    computed.sort();
    failures.sort_by_key(|f| (f.strategy, f.seed));

    let results_path = dir.join("results.csv");
    write_results(&results_path, &collect_rows(cfg, &dir)?)?;
    Ok(ExperimentOutcome { output_dir: dir, results_path, computed, failures })
}

fn clone_error(e: &Error) -> Error {
    Error::InvalidArgument(e.to_string())
}

fn run_cell(cfg: &ExperimentConfig, problem: &Problem, strategy: Strategy, seed: u64, dir: &Path) -> Result<()> {
    log::info!("{} {} seed {seed}: start", problem.id(), strategy);
    let history = run(strategy, problem, &cfg.budget, seed)?;
    for w in &history.warnings {
        log::warn!("{} {} seed {seed}: {w}", problem.id(), strategy);
    }
    let rows = rows_from_history(&history);
    if let Some(r) = rows.iter().find(|r| !r.metric.is_finite()) {
        return Err(Error::Results(format!("non-finite metric at {} evaluations", r.evaluations_used)));
    }
    write_results(&cell_path(dir, strategy, seed), &rows)?;
    log::info!("{} {} seed {seed}: done", problem.id(), strategy);
    Ok(())
}

/// Rows of all completed cells in configuration order.
fn collect_rows(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &strategy in &cfg.strategies {
        for seed in cfg.seeds() {
            let path = cell_path(dir, strategy, seed);
            if path.exists() {
                rows.extend(read_results(&path)?);
            }
        }
    }
    Ok(rows)
}
