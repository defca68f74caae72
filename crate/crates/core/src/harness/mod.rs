//! Dataset and prediction ingestion, end-to-end evaluation and reports.

mod dataset;
mod eval;
mod predictions;
mod report;

pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetError, DatasetRecord, LoadWarning, LoadedExample};
pub use eval::{evaluate, EvalError};
pub use predictions::{load_predictions, parse_predictions, PredictionError, PredictionRecord};
pub use report::{
    emit_report, load_report, render_table, Report, ReportConfig, ReportError, ReportFormat, CODE_VERSION,
};

use serde::de::DeserializeOwned;

/// Top-level JSON array or JSON Lines. Blank lines are skipped in the latter.
pub(crate) fn split_records(text: &str) -> Result<Vec<serde_json::Value>, (usize, serde_json::Error)> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| (0, e));
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i, e)))
        .collect()
}

/// Deserializes one record, returning the offending field path on failure.
pub(crate) fn decode<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, (String, String)> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        (path, e.into_inner().to_string())
    })
}
