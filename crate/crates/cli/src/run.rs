//! `run`: seeded trial batches written to a directory.

use std::path::{Path, PathBuf};

use safestop_sim::{run_batch, TrialError, TrialResult};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::summary::{summarize, summary_csv, trace_file_name, SummaryRow, SUMMARY_FILE};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<SummaryRow>,
    pub trace_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
}

/// Run every trial of `cfg`, write one trace per trial plus `summary.csv`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput, RunError> {
    let spec = cfg.resolve()?;
    let outcomes = run_batch(&spec, &cfg.setup(), cfg.monitoring.modes(), &cfg.seeds())?;
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let mut trace_files = Vec::with_capacity(outcomes.len());
    let mut results: Vec<(bool, TrialResult)> = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let path = out_dir.join(trace_file_name(o.monitoring_enabled, o.result.seed));
        std::fs::write(&path, o.trace.to_csv()).map_err(|e| RunError::Io {
            path: path.clone(),
            source: e,
        })?;
        tracing::debug!(path = %path.display(), success = o.result.success, stops = o.result.stops_issued, "trial done");
        trace_files.push(path);
        results.push((o.monitoring_enabled, o.result));
    }
    let rows = summarize(spec.label(), &results);
    let summary_file = out_dir.join(SUMMARY_FILE);
    std::fs::write(&summary_file, summary_csv(&rows)).map_err(|e| RunError::Io {
        path: summary_file.clone(),
        source: e,
    })?;
    Ok(RunOutput {
        rows,
        trace_files,
        summary_file,
    })
}
