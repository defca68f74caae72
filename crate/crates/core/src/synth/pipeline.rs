use std::path::{Path, PathBuf};

use base64::Engine as _;
use image::RgbaImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::annotator::{Annotator, AnnotatorError, AnnotatorRequest, FilterChecks};
use super::checkpoint::{CandidateOutcome, Checkpoint};
use super::{AnnotatorVerdict, CandidateExample, GroundingPath, Stage, SynthExample};
use crate::document::{Document, WordId};
use crate::grounding::{self, GroundingResult, GroundingStatus};
use crate::selection::{simulate_selection, DragGesture, SelectionRange};
use crate::som::{self, Mark, SomError, PALETTE};
use crate::taxonomy::{Category, Granularity};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} stage: annotator call failed: {source}")]
    Annotator {
        stage: Stage,
        #[source]
        source: AnnotatorError,
    },
    #[error("offline policy needs pre-authored candidates")]
    MissingCandidates,
    #[error("online policy needs an annotator")]
    MissingAnnotator,
    #[error("document for screenshot {0} is not normalized")]
    NotNormalized(String),
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path} was written for screenshot {found} with seed {seed}")]
    CheckpointMismatch { path: PathBuf, found: String, seed: u64 },
    #[error("rendering marks: {0}")]
    Som(#[from] SomError),
}

impl PipelineError {
    fn annotator(stage: Stage, source: AnnotatorError) -> Self {
        PipelineError::Annotator { stage, source }
    }
}

/// Requested number of candidates for one category and granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub category: Category,
    pub granularity: Granularity,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelinePolicy {
    /// Skip every annotator stage; candidates must be supplied.
    pub offline: bool,
    /// Stage-1 requests. Defaults to one candidate per category and
    /// granularity.
    pub quotas: Vec<Quota>,
    /// Edit budget for the fuzzy grounding fallback.
    pub fuzzy_max_edits: usize,
    /// Seeds the order in which stage-1 requests are issued.
    pub seed: u64,
    /// Where rendered SOM images are written, if anywhere.
    pub som_dir: Option<PathBuf>,
    /// Where per-screenshot checkpoints live, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for PipelinePolicy {
    fn default() -> Self {
        let quotas = Category::ALL
            .iter()
            .flat_map(|&category| {
                Granularity::ALL.iter().map(move |&granularity| Quota {
                    category,
                    granularity,
                    count: 1,
                })
            })
            .collect();
        Self {
            offline: false,
            quotas,
            fuzzy_max_edits: 1,
            seed: 0,
            som_dir: None,
            checkpoint_dir: None,
        }
    }
}

pub struct Screenshot {
    pub id: String,
    /// Reference recorded in emitted examples, typically the image path.
    pub reference: String,
    pub image: RgbaImage,
}

pub struct PipelineInput<'a> {
    pub screenshot: &'a Screenshot,
    pub doc: &'a Document,
    /// Pre-authored candidates; when present stage 1 is skipped.
    pub candidates: Option<Vec<CandidateExample>>,
}

/// A candidate that did not make it into the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub candidate_index: usize,
    pub stage: Stage,
    pub reason: String,
    pub candidate: CandidateExample,
    pub provenance: Vec<AnnotatorVerdict>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub examples: Vec<SynthExample>,
    pub dropped: Vec<DropRecord>,
}

impl PipelineOutput {
    fn from_outcomes(outcomes: Vec<CandidateOutcome>) -> Self {
        let mut out = PipelineOutput::default();
        for o in outcomes {
            match o {
                CandidateOutcome::Emitted { example } => out.examples.push(example),
                CandidateOutcome::Dropped { record } => out.dropped.push(record),
            }
        }
        out
    }
}

fn encode_image(img: &RgbaImage) -> Result<String, SomError> {
    Ok(base64::engine::general_purpose::STANDARD.encode(som::encode_png(img)?))
}

struct Run<'a> {
    input: &'a PipelineInput<'a>,
    annotator: Option<&'a dyn Annotator>,
    policy: &'a PipelinePolicy,
    checkpoint_path: Option<PathBuf>,
    screenshot_b64: Option<String>,
}

impl Run<'_> {
    fn screenshot_b64(&mut self) -> Result<String, PipelineError> {
        if self.screenshot_b64.is_none() {
            self.screenshot_b64 = Some(encode_image(&self.input.screenshot.image)?);
        }
        Ok(self.screenshot_b64.clone().unwrap_or_default())
    }

    fn save(&self, checkpoint: &Checkpoint) -> Result<(), PipelineError> {
        if let Some(path) = &self.checkpoint_path {
            checkpoint.save(path).map_err(|source| PipelineError::Checkpoint {
                path: path.clone(),
                source,
            })?;
        }
        Ok(())
    }

    fn generate_candidates(&mut self) -> Result<Vec<CandidateExample>, PipelineError> {
        let annotator = self.annotator.ok_or(PipelineError::MissingAnnotator)?;
        let mut plan = self.policy.quotas.clone();
        plan.shuffle(&mut ChaCha8Rng::seed_from_u64(self.policy.seed));
        let ocr_text = self
            .input
            .doc
            .words()
            .iter()
            .map(|w| w.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let image = self.screenshot_b64()?;
        let mut out = Vec::new();
        for quota in plan.iter().filter(|q| q.count > 0) {
            let request = AnnotatorRequest {
                stage: Stage::InstructionGen,
                image: image.clone(),
                payload: json!({
                    "category": quota.category,
                    "granularity": quota.granularity,
                    "count": quota.count,
                    "ocr_text": ocr_text,
                }),
            };
            let response = annotator
                .call(&request)
                .map_err(|e| PipelineError::annotator(Stage::InstructionGen, e))?;
            let content = response.content.unwrap_or(Value::Array(Vec::new()));
            let mut batch: Vec<CandidateExample> = serde_json::from_value(content).map_err(|e| {
                PipelineError::annotator(Stage::InstructionGen, AnnotatorError::Protocol(e.to_string()))
            })?;
            batch.truncate(quota.count);
            out.extend(batch);
        }
        Ok(out)
    }

    fn process(&mut self, index: usize, candidate: &CandidateExample) -> Result<CandidateOutcome, PipelineError> {
        let doc = self.input.doc;
        let mut provenance = Vec::new();
        let drop = |stage: Stage, reason: String, provenance: Vec<AnnotatorVerdict>| {
            Ok(CandidateOutcome::Dropped {
                record: DropRecord {
                    candidate_index: index,
                    stage,
                    reason,
                    candidate: candidate.clone(),
                    provenance,
                },
            })
        };

        if candidate.instruction.trim().is_empty() {
            return drop(Stage::InstructionGen, "empty instruction".into(), provenance);
        }

        // Stage 2: deterministic grounding first, annotator only as fallback.
        let mut grounded = grounding::ground_span(doc, &candidate.target_span);
        let mut path = GroundingPath::Exact;
        if !grounded.is_grounded() && self.policy.fuzzy_max_edits > 0 {
            grounded = grounding::fuzzy_ground_span(doc, &candidate.target_span, self.policy.fuzzy_max_edits);
            path = GroundingPath::Fuzzy;
        }
        if !grounded.is_grounded() && !self.policy.offline {
            provenance.push(AnnotatorVerdict {
                stage: Stage::GroundingCheck,
                accepted: false,
                payload: format!("deterministic grounding failed: {}", grounded.notes),
            });
            grounded = self.annotator_grounding(candidate)?;
            path = GroundingPath::Annotator;
        }
        provenance.push(AnnotatorVerdict {
            stage: Stage::GroundingCheck,
            accepted: grounded.is_grounded(),
            payload: grounded.notes.clone(),
        });
        let (Some(start_id), Some(end_id)) = (grounded.start_id, grounded.end_id) else {
            return drop(Stage::GroundingCheck, grounded.notes, provenance);
        };
        let (start_point, end_point) = match grounding::derive_drag_coordinates(doc, start_id, end_id) {
            Ok(points) => points,
            Err(e) => return drop(Stage::GroundingCheck, e.to_string(), provenance),
        };
        let expected = SelectionRange {
            start_word_id: start_id,
            end_word_id: end_id,
        };
        if simulate_selection(doc, &DragGesture::new(start_point, end_point)) != Some(expected) {
            return drop(
                Stage::GroundingCheck,
                "derived drag does not reproduce the grounded range".into(),
                provenance,
            );
        }

        // Stage 3.
        let example_id = format!("{}-{index:04}", self.input.screenshot.id);
        let marked = som::render_som(&self.input.screenshot.image, &span_marks(doc, start_id, end_id))?;
        let som_image = match &self.policy.som_dir {
            Some(dir) => {
                let path = dir.join(format!("{example_id}.png"));
                std::fs::create_dir_all(dir).map_err(|e| SomError::Image(e.into()))?;
                som::save_png(&marked, &path)?;
                Some(path.display().to_string())
            }
            None => None,
        };

        if self.policy.offline {
            provenance.push(AnnotatorVerdict {
                stage: Stage::Filter,
                accepted: true,
                payload: "offline".into(),
            });
        } else {
            let annotator = self.annotator.ok_or(PipelineError::MissingAnnotator)?;
            let request = AnnotatorRequest {
                stage: Stage::Filter,
                image: encode_image(&marked)?,
                payload: json!({
                    "instruction": candidate.instruction,
                    "target_span": candidate.target_span,
                    "start_id": start_id,
                    "end_id": end_id,
                    "start_point": start_point,
                    "end_point": end_point,
                }),
            };
            let response = annotator
                .call(&request)
                .map_err(|e| PipelineError::annotator(Stage::Filter, e))?;
            let checks: Option<FilterChecks> = response.content.clone().and_then(|c| serde_json::from_value(c).ok());
            let (accepted, payload) = match checks {
                Some(c) => (
                    c.passed() && response.accepted.unwrap_or(true),
                    format!(
                        "instruction_clear={} tight_enclosure={}; {}",
                        c.instruction_clear, c.tight_enclosure, response.notes
                    ),
                ),
                None => (
                    false,
                    format!("verdict does not address both filter checks; {}", response.notes),
                ),
            };
            provenance.push(AnnotatorVerdict {
                stage: Stage::Filter,
                accepted,
                payload: payload.clone(),
            });
            if !accepted {
                return drop(Stage::Filter, payload, provenance);
            }
        }

        Ok(CandidateOutcome::Emitted {
            example: SynthExample {
                example_id,
                screenshot: self.input.screenshot.reference.clone(),
                candidate: candidate.clone(),
                start_id,
                end_id,
                start_point,
                end_point,
                grounding_path: path,
                som_image,
                provenance,
            },
        })
    }

    fn annotator_grounding(&mut self, candidate: &CandidateExample) -> Result<GroundingResult, PipelineError> {
        let annotator = self.annotator.ok_or(PipelineError::MissingAnnotator)?;
        let request = AnnotatorRequest {
            stage: Stage::GroundingCheck,
            image: self.screenshot_b64()?,
            payload: json!({
                "target_span": candidate.target_span,
                "ocr": self.input.doc.to_records(),
            }),
        };
        let response = annotator
            .call(&request)
            .map_err(|e| PipelineError::annotator(Stage::GroundingCheck, e))?;
        let parsed: Option<GroundingResult> = response.content.and_then(|c| serde_json::from_value(c).ok());
        let Some(result) = parsed else {
            return Ok(GroundingResult::not_grounded("annotator returned no grounding object"));
        };
        Ok(match (result.status, result.start_id, result.end_id) {
            (GroundingStatus::Grounded, Some(s), Some(e)) if self.valid_range(s, e) => result,
            (GroundingStatus::Grounded, _, _) => {
                GroundingResult::not_grounded(format!("annotator ids are invalid: {}", result.notes))
            }
            _ => GroundingResult::not_grounded(result.notes),
        })
    }

    fn valid_range(&self, start: WordId, end: WordId) -> bool {
        let doc = self.input.doc;
        matches!((doc.reading_index(start), doc.reading_index(end)), (Some(a), Some(b)) if a <= b)
    }
}

/// Green box on the start word, red box on the end word (one green box for a
/// single-word span).
fn span_marks(doc: &Document, start_id: WordId, end_id: WordId) -> Vec<Mark> {
    let mut marks = Vec::new();
    if let Some(w) = doc.word(start_id) {
        marks.push(Mark::bbox(start_id, w.bbox).with_color(PALETTE[0]));
    }
    if end_id != start_id {
        if let Some(w) = doc.word(end_id) {
            marks.push(Mark::bbox(end_id, w.bbox).with_color(PALETTE[1]));
        }
    }
    marks
}

fn checkpoint_path(dir: &Path, screenshot: &str) -> PathBuf {
    dir.join(format!("{screenshot}.checkpoint.json"))
}

/// Runs all three stages for one screenshot, resuming from its checkpoint
/// when the policy names a checkpoint directory.
pub fn run_pipeline(
    input: &PipelineInput<'_>,
    annotator: Option<&dyn Annotator>,
    policy: &PipelinePolicy,
) -> Result<PipelineOutput, PipelineError> {
    let shot = input.screenshot;
    if !input.doc.is_normalized() {
        return Err(PipelineError::NotNormalized(shot.id.clone()));
    }
    if policy.offline && input.candidates.is_none() {
        return Err(PipelineError::MissingCandidates);
    }
    let ckpt_path = policy.checkpoint_dir.as_deref().map(|d| checkpoint_path(d, &shot.id));
    let mut checkpoint = match &ckpt_path {
        Some(path) => Checkpoint::load(path)
            .map_err(|source| PipelineError::Checkpoint {
                path: path.clone(),
                source,
            })?
            .unwrap_or_else(|| Checkpoint::new(&shot.id, policy.seed)),
        None => Checkpoint::new(&shot.id, policy.seed),
    };
    if checkpoint.screenshot != shot.id || checkpoint.seed != policy.seed {
        return Err(PipelineError::CheckpointMismatch {
            path: ckpt_path.unwrap_or_default(),
            found: checkpoint.screenshot,
            seed: checkpoint.seed,
        });
    }

    let mut run = Run {
        input,
        annotator,
        policy,
        checkpoint_path: ckpt_path,
        screenshot_b64: None,
    };

    let candidates = match (&checkpoint.candidates, &input.candidates) {
        (Some(saved), _) => saved.clone(),
        (None, Some(given)) => given.clone(),
        (None, None) => run.generate_candidates()?,
    };
    if checkpoint.candidates.is_none() {
        checkpoint.candidates = Some(candidates.clone());
        run.save(&checkpoint)?;
    }

    for (index, candidate) in candidates.iter().enumerate().skip(checkpoint.outcomes.len()) {
        let outcome = run.process(index, candidate)?;
        checkpoint.outcomes.push(outcome);
        run.save(&checkpoint)?;
    }
    Ok(PipelineOutput::from_outcomes(checkpoint.outcomes))
}

/// Runs independent screenshots in parallel; results keep input order.
pub fn run_corpus(
    inputs: &[PipelineInput<'_>],
    annotator: Option<&dyn Annotator>,
    policy: &PipelinePolicy,
) -> Vec<Result<PipelineOutput, PipelineError>> {
    inputs
        .par_iter()
        .map(|input| run_pipeline(input, annotator, policy))
        .collect()
}
