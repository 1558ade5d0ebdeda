use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::trial::{run_trial_isolated, TrialResult};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("output {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Aggregate over the trials of one `(N, T)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scheme: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_comm: f64,
    pub max_comm: u64,
    pub lemma_violations: usize,
    pub premature_bob: usize,
    pub aborted: usize,
    pub crashed: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub results: Vec<TrialResult>,
    pub cells: Vec<CellSummary>,
}

impl RunOutput {
    /// Trials that violate a checked property: a failed trace check, a
    /// premature termination by Bob, or a crash.
    pub fn assertion_failures(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.failed_checks() || r.premature_bob || r.error.is_some())
            .count()
    }
}

/// Global trial index of trial `j` in cell `cell`, which fixes its seed.
pub fn trial_index(cfg: &ExperimentConfig, cell: usize, j: usize) -> u64 {
    (cell * cfg.trials + j) as u64
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let jobs: Vec<(usize, u64)> = cfg
        .t_values
        .iter()
        .enumerate()
        .flat_map(|(cell, t)| (0..cfg.trials).map(move |j| (*t, trial_index(cfg, cell, j))))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let mut results: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .map(|(t, idx)| run_trial_isolated(cfg, *t, *idx))
            .collect()
    });
    results.sort_by_key(|r| r.trial);
    let cells = cfg
        .t_values
        .iter()
        .enumerate()
        .map(|(cell, t)| {
            let lo = trial_index(cfg, cell, 0);
            let rows: Vec<&TrialResult> = results
                .iter()
                .filter(|r| r.trial >= lo && r.trial < lo + cfg.trials as u64)
                .collect();
            summarize(cfg, *t, &rows)
        })
        .collect();
    Ok(RunOutput { results, cells })
}

fn summarize(cfg: &ExperimentConfig, t: usize, rows: &[&TrialResult]) -> CellSummary {
    let n = rows.len().max(1) as f64;
    CellSummary {
        scheme: cfg.scheme.name().into(),
        n: cfg.n,
        t,
        trials: rows.len(),
        success_rate: rows.iter().filter(|r| r.success).count() as f64 / n,
        mean_comm: rows.iter().map(|r| r.comm_bits as f64).sum::<f64>() / n,
        max_comm: rows.iter().map(|r| r.comm_bits).max().unwrap_or(0),
        lemma_violations: rows.iter().filter(|r| r.failed_checks()).count(),
        premature_bob: rows.iter().filter(|r| r.premature_bob).count(),
        aborted: rows.iter().filter(|r| r.aborted.is_some()).count(),
        crashed: rows.iter().filter(|r| r.error.is_some()).count(),
    }
}

/// Least-squares fit `y = a + b x`.
pub fn fit_affine(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Fit of communication against `T` over all trials.
pub fn comm_fit(results: &[TrialResult]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| (r.t as f64, r.comm_bits as f64))
        .collect();
    fit_affine(&pts)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<out>.jsonl` (config header, then one row per trial) and
/// `<out>.csv` (one row per cell).
pub fn write_outputs(
    cfg: &ExperimentConfig,
    out: &RunOutput,
    base: &Path,
) -> Result<(PathBuf, PathBuf), RunError> {
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let jsonl = base.with_extension("jsonl");
    let csv_path = base.with_extension("csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&jsonl).map_err(io_err(&jsonl))?);
    let header = serde_json::json!({ "config": cfg });
    writeln!(f, "{header}").map_err(io_err(&jsonl))?;
    for r in &out.results {
        writeln!(f, "{}", serde_json::to_string(r).expect("rows serialize"))
            .map_err(io_err(&jsonl))?;
    }
    f.flush().map_err(io_err(&jsonl))?;
    let mut w = csv::Writer::from_path(&csv_path)?;
    for c in &out.cells {
        w.serialize(c)?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    Ok((jsonl, csv_path))
}
