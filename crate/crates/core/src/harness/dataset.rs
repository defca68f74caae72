use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{load_ocr_file, normalize_reading_order, parse_ocr, Document, DocumentError, OcrRecord, WordId};
use crate::geometry::Point;
use crate::grounding::derive_drag_coordinates;
use crate::metrics::GroundTruth;
use crate::selection::{simulate_selection, DragGesture};
use crate::taxonomy::{Application, Category, Density, ExampleMeta, Form, Granularity, InterfaceLevel};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record {index}: malformed JSON: {message}")]
    Json { index: usize, message: String },
    #[error("record {index}: field `{field}`: {message}")]
    Schema {
        index: usize,
        field: String,
        message: String,
    },
    #[error("record {index}: OCR: {source}")]
    Ocr {
        index: usize,
        #[source]
        source: DocumentError,
    },
    #[error("record {index}: duplicate example_id {id:?}")]
    DuplicateId { index: usize, id: String },
}

/// One benchmark example as stored on disk.
///
/// OCR is either embedded under `ocr` or referenced by `ocr_file` (resolved
/// against the dataset file's directory). When both are present the embedded
/// words are used and a warning is raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub example_id: String,
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    pub instruction: String,
    pub form: Form,
    pub category: Category,
    pub granularity: Granularity,
    pub interface_level: InterfaceLevel,
    pub density: Density,
    pub application: Application,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr: Option<Vec<OcrRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_file: Option<String>,
    pub gt_start_id: WordId,
    pub gt_end_id: WordId,
    pub gt_start_point: Point,
    pub gt_end_point: Point,
}

impl DatasetRecord {
    pub fn meta(&self) -> ExampleMeta {
        ExampleMeta {
            interface_level: self.interface_level,
            density: self.density,
            category: self.category,
            granularity: self.granularity,
            form: self.form,
            application: self.application,
        }
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            start_word_id: self.gt_start_id,
            end_word_id: self.gt_end_id,
            start_point: self.gt_start_point,
            end_point: self.gt_end_point,
        }
    }
}

/// A validated record with its normalized document.
#[derive(Debug, Clone)]
pub struct LoadedExample {
    pub record: DatasetRecord,
    pub doc: Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarning {
    pub index: usize,
    pub example_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub examples: Vec<LoadedExample>,
    pub warnings: Vec<LoadWarning>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Reads a JSON array or JSON Lines dataset file.
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, path.parent().unwrap_or(Path::new("")))
}

/// Parses dataset text; `base_dir` resolves relative `ocr_file` references.
pub fn parse_dataset(text: &str, base_dir: &Path) -> Result<Dataset, DatasetError> {
    let values = super::split_records(text).map_err(|(index, e)| DatasetError::Json {
        index,
        message: e.to_string(),
    })?;
    let mut ocr_cache: HashMap<PathBuf, Vec<OcrRecord>> = HashMap::new();
    let mut ids = HashSet::new();
    let mut out = Dataset::default();

    for (index, value) in values.into_iter().enumerate() {
        let mut record: DatasetRecord =
            super::decode(value).map_err(|(field, message)| DatasetError::Schema { index, field, message })?;
        if !ids.insert(record.example_id.clone()) {
            return Err(DatasetError::DuplicateId {
                index,
                id: record.example_id,
            });
        }
        let warn = |out: &mut Dataset, message: String| {
            out.warnings.push(LoadWarning {
                index,
                example_id: record.example_id.clone(),
                message,
            })
        };

        let words = match (record.ocr.take(), &record.ocr_file) {
            (Some(embedded), file) => {
                if let Some(file) = file {
                    warn(
                        &mut out,
                        format!("both ocr and ocr_file ({file}) given; using embedded ocr"),
                    );
                }
                embedded
            }
            (None, Some(file)) => {
                let full = base_dir.join(file);
                match ocr_cache.get(&full) {
                    Some(words) => words.clone(),
                    None => {
                        let words = load_ocr_file(&full)
                            .map_err(|source| DatasetError::Ocr { index, source })?
                            .to_records();
                        ocr_cache.insert(full, words.clone());
                        words
                    }
                }
            }
            (None, None) => {
                return Err(DatasetError::Schema {
                    index,
                    field: "ocr".into(),
                    message: "one of `ocr` or `ocr_file` is required".into(),
                })
            }
        };
        let mut doc = parse_ocr(words.clone()).map_err(|source| DatasetError::Ocr { index, source })?;
        if let (Some(w), Some(h)) = (record.width, record.height) {
            doc = doc.with_image_size(w, h);
        }
        let doc = normalize_reading_order(doc);
        record.ocr = Some(words);

        let schema = |field: &str, message: String| DatasetError::Schema {
            index,
            field: field.into(),
            message,
        };
        let si = doc
            .reading_index(record.gt_start_id)
            .ok_or_else(|| schema("gt_start_id", format!("word {} is not in the OCR", record.gt_start_id)))?;
        let ei = doc
            .reading_index(record.gt_end_id)
            .ok_or_else(|| schema("gt_end_id", format!("word {} is not in the OCR", record.gt_end_id)))?;
        if si > ei {
            return Err(schema(
                "gt_end_id",
                format!(
                    "word {} precedes start word {} in reading order",
                    record.gt_end_id, record.gt_start_id
                ),
            ));
        }
        for (field, p) in [
            ("gt_start_point", record.gt_start_point),
            ("gt_end_point", record.gt_end_point),
        ] {
            if !p.is_finite() {
                return Err(schema(field, "coordinates must be finite".into()));
            }
        }

        let gt = record.ground_truth();
        let round_trip = derive_drag_coordinates(&doc, gt.start_word_id, gt.end_word_id)
            .ok()
            .and_then(|(s, e)| simulate_selection(&doc, &DragGesture::new(s, e)));
        if round_trip != Some(gt.range()) {
            warn(
                &mut out,
                format!(
                    "ground truth {}..{} fails the selection round trip (simulated {:?})",
                    gt.start_word_id,
                    gt.end_word_id,
                    round_trip.map(|r| (r.start_word_id, r.end_word_id))
                ),
            );
        }
        out.examples.push(LoadedExample { record, doc });
    }
    Ok(out)
}
