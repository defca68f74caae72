use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{extract_drag_from, parse_transcript, Action, ActionError, Dialect, NormalizedDrag};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("prediction {index}: malformed JSON: {message}")]
    Json { index: usize, message: String },
    #[error("prediction {index}: field `{field}`: {message}")]
    Schema {
        index: usize,
        field: String,
        message: String,
    },
    #[error("prediction {index}: needs exactly one of `transcript` or `actions`")]
    Body { index: usize },
}

/// A model output for one example: raw transcript text (with its dialect) or
/// an already structured action list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialect: Option<Dialect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<Action>>,
}

impl PredictionRecord {
    pub fn from_transcript(example_id: impl Into<String>, transcript: impl Into<String>, dialect: Dialect) -> Self {
        Self {
            example_id: example_id.into(),
            transcript: Some(transcript.into()),
            dialect: Some(dialect),
            actions: None,
        }
    }

    pub fn from_actions(example_id: impl Into<String>, actions: Vec<Action>) -> Self {
        Self {
            example_id: example_id.into(),
            transcript: None,
            dialect: None,
            actions: Some(actions),
        }
    }

    /// The drag this prediction performs, if any.
    pub fn drag(&self) -> Result<Option<NormalizedDrag>, ActionError> {
        match (&self.actions, &self.transcript) {
            (Some(actions), _) => Ok(extract_drag_from(actions)),
            (None, Some(raw)) => {
                let t = parse_transcript(raw, self.dialect.unwrap_or_default())?;
                Ok(extract_drag_from(&t.actions))
            }
            (None, None) => Ok(None),
        }
    }
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PredictionError> {
    let text = std::fs::read_to_string(path).map_err(|source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_predictions(&text)
}

/// Parses a JSON array or JSON Lines prediction file.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, PredictionError> {
    let values = super::split_records(text).map_err(|(index, e)| PredictionError::Json {
        index,
        message: e.to_string(),
    })?;
    values
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            let p: PredictionRecord =
                super::decode(v).map_err(|(field, message)| PredictionError::Schema { index, field, message })?;
            if p.transcript.is_some() == p.actions.is_some() {
                return Err(PredictionError::Body { index });
            }
            Ok(p)
        })
        .collect()
}
