use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use super::dataset::{Dataset, LoadedExample};
use super::predictions::PredictionRecord;
use super::report::Report;
use crate::metrics::{aggregate, evaluate_example, summarize, EvalConfig, MetricError, MetricResult, OsSelection};
use crate::taxonomy::GroupKey;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(MetricError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("duplicate prediction for example {0:?}")]
    DuplicatePrediction(String),
    #[error("prediction for unknown example {0:?}")]
    UnknownExample(String),
    #[error("example {example_id}: {source}")]
    Metric {
        example_id: String,
        #[source]
        source: MetricError,
    },
}

/// Scores every dataset example and aggregates the results.
///
/// Examples without a prediction are untriggered. Per-example results are
/// ordered by `example_id`.
pub fn evaluate(
    dataset: &Dataset,
    predictions: &[PredictionRecord],
    cfg: &EvalConfig,
    group_by: &[GroupKey],
) -> Result<Report, EvalError> {
    cfg.validate().map_err(EvalError::Config)?;
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let known: HashSet<&str> = dataset.examples.iter().map(|e| e.record.example_id.as_str()).collect();
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if !known.contains(p.example_id.as_str()) {
            return Err(EvalError::UnknownExample(p.example_id.clone()));
        }
        if by_id.insert(p.example_id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.example_id.clone()));
        }
    }

    let mut examples: Vec<MetricResult> = dataset
        .examples
        .par_iter()
        .map(|ex| score(ex, by_id.get(ex.record.example_id.as_str()).copied(), cfg))
        .collect::<Result<_, _>>()?;
    examples.sort_by(|a, b| a.example_id.cmp(&b.example_id));

    let overall = summarize(&examples, cfg).map_err(EvalError::Config)?;
    let groups = if group_by.is_empty() {
        Vec::new()
    } else {
        aggregate(&examples, group_by, cfg).map_err(EvalError::Config)?
    };
    Ok(Report::new(cfg, group_by, overall, groups, examples))
}

fn score(ex: &LoadedExample, pred: Option<&PredictionRecord>, cfg: &EvalConfig) -> Result<MetricResult, EvalError> {
    let record = &ex.record;
    let meta = record.meta();
    let Some(pred) = pred else {
        return Ok(MetricResult::untriggered(&record.example_id, meta).with_note("no prediction"));
    };
    let drag = match pred.drag() {
        Ok(d) => d,
        Err(e) => return Ok(MetricResult::untriggered(&record.example_id, meta).with_note(format!("unparseable: {e}"))),
    };
    let gt = record.ground_truth();
    let filtered;
    let doc = if cfg.min_confidence > 0.0 {
        filtered = ex
            .doc
            .retain(|w| w.confidence >= cfg.min_confidence || w.id == gt.start_word_id || w.id == gt.end_word_id);
        &filtered
    } else {
        &ex.doc
    };
    evaluate_example(&record.example_id, meta, doc, drag.as_ref(), &gt, cfg, &OsSelection).map_err(|source| {
        EvalError::Metric {
            example_id: record.example_id.clone(),
            source,
        }
    })
}
