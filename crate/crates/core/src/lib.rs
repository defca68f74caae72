//! Evaluation and data tooling for text-drag GUI grounding.
//!
//! The crate ingests word-level OCR for a screenshot ([`document`]), parses
//! model action transcripts ([`action`]), scores predicted drags ([`metrics`])
//! with the help of a desktop selection model ([`selection`]), grounds text
//! spans onto OCR words ([`grounding`]), and drives the data-synthesis
//! pipeline ([`synth`], [`som`]). [`harness`] ties these together for
//! dataset-level evaluation and reporting.

pub mod action;
pub mod document;
pub mod geometry;
pub mod grounding;
pub mod harness;
pub mod metrics;
pub mod selection;
pub mod som;
pub mod synth;
pub mod taxonomy;

pub use action::{compute_dtr, extract_drag, parse_transcript, Action, Dialect, NormalizedDrag, Transcript};
pub use document::{normalize_reading_order, parse_ocr, Document, OcrRecord, TextLine, Word, WordId};
pub use geometry::{BBox, Point};
pub use grounding::{derive_drag_coordinates, fuzzy_ground_span, ground_span, GroundingResult, GroundingStatus};
pub use metrics::{
    aggregate, b_dist, d_pixel, map_point_to_word, success, EvalConfig, GroundTruth, MappedEndpoints, MetricResult,
};
pub use selection::{place_caret, simulate_selection, snaps_correctly, DragGesture, SelectionRange};
