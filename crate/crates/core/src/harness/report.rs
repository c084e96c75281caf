use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::federation::TrainingHistory;

/// Fixed column order of the per-round results file.
pub const CSV_HEADER: [&str; 9] = [
    "round",
    "score",
    "emd",
    "strategy",
    "n_clients",
    "k_selected",
    "partition",
    "seed",
    "wall_s",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the history as CSV: header, one row per round, then a summary row
/// whose `round` field is `optimal_round=<argmin-EMD round>` and whose score
/// and EMD fields hold the best Score and the minimum EMD.
pub fn render_history_csv(
    config: &ExperimentConfig,
    history: &TrainingHistory,
    total_wall_s: f64,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    let partition = config.partition_plan().to_string();
    for r in &history.records {
        w.write_record([
            r.round.to_string(),
            r.score.to_string(),
            r.emd.to_string(),
            r.strategy.to_string(),
            r.n_clients.to_string(),
            r.k_selected.to_string(),
            r.partition.clone(),
            r.seed.to_string(),
            r.wall_s.to_string(),
        ])?;
    }
    let optimal = history
        .optimal_round()
        .map_or_else(|| "none".to_string(), |r| r.to_string());
    w.write_record([
        format!("optimal_round={optimal}"),
        opt(history.best_score()),
        opt(history.min_emd()),
        config.strategy.to_string(),
        config.n_clients.to_string(),
        config.k_selected.to_string(),
        partition,
        config.seed.to_string(),
        total_wall_s.to_string(),
    ])?;
    w.into_inner()
        .map_err(|e| Error::Contract(format!("csv buffer: {e}")))
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_csv_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::config("output", "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_history_csv(
    path: &Path,
    config: &ExperimentConfig,
    history: &TrainingHistory,
    total_wall_s: f64,
) -> Result<()> {
    let bytes = render_history_csv(config, history, total_wall_s)?;
    write_csv_atomic(path, &bytes)
}
