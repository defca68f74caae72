//! Three-stage construction of drag training examples: instruction
//! generation, grounding, and filtering, with an external annotator service
//! behind the [`Annotator`] trait.

mod annotator;
mod checkpoint;
mod pipeline;
mod spot_check;

pub use annotator::{
    Annotator, AnnotatorError, AnnotatorRequest, AnnotatorResponse, FilterChecks, HttpAnnotator, HttpAnnotatorConfig,
    StubAnnotator, ANNOTATOR_URL_ENV,
};
pub use checkpoint::{CandidateOutcome, Checkpoint};
pub use pipeline::{
    run_corpus, run_pipeline, DropRecord, PipelineError, PipelineInput, PipelineOutput, PipelinePolicy, Quota,
    Screenshot,
};
pub use spot_check::{spot_check_sample, SpotCheckEntry, SpotCheckError, SpotCheckManifest};

use serde::{Deserialize, Serialize};

use crate::document::WordId;
use crate::geometry::Point;
use crate::taxonomy::{Category, Form, Granularity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InstructionGen,
    GroundingCheck,
    Filter,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::InstructionGen => "instruction_gen",
            Stage::GroundingCheck => "grounding_check",
            Stage::Filter => "filter",
        })
    }
}

/// An instruction and the span it refers to, before grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateExample {
    pub instruction: String,
    pub category: Category,
    pub granularity: Granularity,
    pub form: Form,
    pub target_span: String,
}

/// A recorded decision at one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorVerdict {
    pub stage: Stage,
    pub accepted: bool,
    pub payload: String,
}

/// How stage 2 located the span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingPath {
    Exact,
    Fuzzy,
    Annotator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthExample {
    pub example_id: String,
    pub screenshot: String,
    #[serde(flatten)]
    pub candidate: CandidateExample,
    pub start_id: WordId,
    pub end_id: WordId,
    pub start_point: Point,
    pub end_point: Point,
    pub grounding_path: GroundingPath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub som_image: Option<String>,
    pub provenance: Vec<AnnotatorVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: i64,
    pub y: i64,
}

impl From<Point> for PixelPoint {
    fn from(p: Point) -> Self {
        Self {
            x: p.x.round() as i64,
            y: p.y.round() as i64,
        }
    }
}

/// One line of an output corpus: a [`SynthExample`] with coordinates rounded
/// to whole pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub example_id: String,
    pub screenshot: String,
    pub instruction: String,
    pub category: Category,
    pub granularity: Granularity,
    pub form: Form,
    pub target_span: String,
    pub start_id: WordId,
    pub end_id: WordId,
    pub start_point: PixelPoint,
    pub end_point: PixelPoint,
    pub grounding_path: GroundingPath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub som_image: Option<String>,
    pub provenance: Vec<AnnotatorVerdict>,
}

impl From<&SynthExample> for CorpusRecord {
    fn from(e: &SynthExample) -> Self {
        Self {
            example_id: e.example_id.clone(),
            screenshot: e.screenshot.clone(),
            instruction: e.candidate.instruction.clone(),
            category: e.candidate.category,
            granularity: e.candidate.granularity,
            form: e.candidate.form,
            target_span: e.candidate.target_span.clone(),
            start_id: e.start_id,
            end_id: e.end_id,
            start_point: e.start_point.into(),
            end_point: e.end_point.into(),
            grounding_path: e.grounding_path,
            som_image: e.som_image.clone(),
            provenance: e.provenance.clone(),
        }
    }
}

/// Renders records as JSON Lines.
pub fn corpus_jsonl(records: &[CorpusRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("corpus records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_corpus_jsonl(text: &str) -> Result<Vec<CorpusRecord>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i, e)))
        .collect()
}
