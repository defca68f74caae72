//! Drag-grounding metrics: coordinate-to-word mapping, B-Dist, pixel
//! distance, success, and grouped aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::NormalizedDrag;
use crate::document::{Document, WordId};
use crate::geometry::Point;
use crate::selection::{self, DragGesture, SelectionRange};
use crate::taxonomy::{ExampleMeta, GroupKey};

pub const DEFAULT_PHI: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("word id {0} is not in the document")]
    UnknownWord(WordId),
    #[error("document has no words")]
    EmptyDocument,
    #[error("no results to aggregate")]
    EmptyResults,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub start_word_id: WordId,
    pub end_word_id: WordId,
    pub start_point: Point,
    pub end_point: Point,
}

impl GroundTruth {
    pub fn range(&self) -> SelectionRange {
        SelectionRange {
            start_word_id: self.start_word_id,
            end_word_id: self.end_word_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedEndpoints {
    pub start_word_id: WordId,
    pub end_word_id: WordId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Pixel threshold for the distance branch of success.
    pub phi: f64,
    /// Compute B-Dist and SR over triggered examples only.
    pub conditional_aggregation: bool,
    /// OCR words below this confidence are ignored (ground-truth words are
    /// always kept).
    pub min_confidence: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            phi: DEFAULT_PHI,
            conditional_aggregation: true,
            min_confidence: 0.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if !(self.phi.is_finite() && self.phi > 0.0) {
            return Err(MetricError::InvalidConfig(format!(
                "phi must be positive, got {}",
                self.phi
            )));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(MetricError::InvalidConfig(format!(
                "min_confidence must be in [0, 1], got {}",
                self.min_confidence
            )));
        }
        Ok(())
    }
}

/// Source of selection verdicts for the snapping branch of success.
pub trait SelectionSimulator {
    fn simulate(&self, doc: &Document, gesture: &DragGesture) -> Option<SelectionRange>;
}

/// The word-caret desktop model from [`crate::selection`].
#[derive(Debug, Clone, Copy, Default)]
pub struct OsSelection;

impl SelectionSimulator for OsSelection {
    fn simulate(&self, doc: &Document, gesture: &DragGesture) -> Option<SelectionRange> {
        selection::simulate_selection(doc, gesture)
    }
}

/// Per-example outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub example_id: String,
    #[serde(flatten)]
    pub meta: ExampleMeta,
    pub triggered: bool,
    pub b_dist: Option<f64>,
    pub d_pixel: Option<f64>,
    pub sr: Option<u8>,
    pub mapped: Option<MappedEndpoints>,
    /// Endpoints were swapped because the drag ran backwards.
    pub reversed: bool,
    /// Success came from the snapping branch, not the pixel threshold.
    pub snap_used: bool,
    /// Snapping succeeded although neither ground-truth endpoint sits on a
    /// line boundary.
    pub mid_line_snap: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl MetricResult {
    pub fn untriggered(example_id: impl Into<String>, meta: ExampleMeta) -> Self {
        Self {
            example_id: example_id.into(),
            meta,
            triggered: false,
            b_dist: None,
            d_pixel: None,
            sr: None,
            mapped: None,
            reversed: false,
            snap_used: false,
            mid_line_snap: false,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Word a predicted coordinate lands on.
///
/// A containing box wins (smallest area, then earliest reading index). With
/// no container, the line whose vertical center is nearest `p.y` is chosen
/// and, within it, the word at the smallest horizontal distance (earliest
/// reading index on ties).
pub fn map_point_to_word(doc: &Document, p: Point) -> Result<WordId, MetricError> {
    if doc.is_empty() {
        return Err(MetricError::EmptyDocument);
    }
    let words = doc.words();
    let mut container: Option<(f64, usize)> = None;
    for (k, w) in words.iter().enumerate() {
        if w.bbox.contains(p) {
            let area = w.bbox.area();
            if container.is_none_or(|(best, _)| area < best) {
                container = Some((area, k));
            }
        }
    }
    if let Some((_, k)) = container {
        return Ok(words[k].id);
    }

    let lines = doc.lines();
    if lines.is_empty() {
        // Unnormalized document: fall back to a global horizontal scan.
        let k = argmin_by(0..words.len(), |&k| words[k].bbox.horizontal_distance(p)).expect("non-empty");
        return Ok(words[k].id);
    }
    let line = argmin_by(0..lines.len(), |&i| (lines[i].center_y() - p.y).abs()).expect("non-empty");
    let (_, members) = doc.line_words(line).expect("line exists");
    let k = argmin_by(0..members.len(), |&k| members[k].bbox.horizontal_distance(p)).expect("lines are non-empty");
    Ok(members[k].id)
}

/// First item with the strictly smallest key.
fn argmin_by<T: Copy>(items: impl Iterator<Item = T>, key: impl Fn(&T) -> f64) -> Option<T> {
    let mut best: Option<(f64, T)> = None;
    for item in items {
        let k = key(&item);
        if best.is_none_or(|(b, _)| k < b) {
            best = Some((k, item));
        }
    }
    best.map(|(_, t)| t)
}

pub fn map_drag(doc: &Document, pred: &NormalizedDrag) -> Result<MappedEndpoints, MetricError> {
    Ok(MappedEndpoints {
        start_word_id: map_point_to_word(doc, pred.start)?,
        end_word_id: map_point_to_word(doc, pred.end)?,
    })
}

fn index_of(doc: &Document, id: WordId) -> Result<usize, MetricError> {
    doc.reading_index(id).ok_or(MetricError::UnknownWord(id))
}

/// Mean reading-index error of the two endpoints; always a multiple of 0.5.
pub fn b_dist(doc: &Document, mapped: &MappedEndpoints, gt: &GroundTruth) -> Result<f64, MetricError> {
    let ms = index_of(doc, mapped.start_word_id)?;
    let me = index_of(doc, mapped.end_word_id)?;
    let gs = index_of(doc, gt.start_word_id)?;
    let ge = index_of(doc, gt.end_word_id)?;
    Ok((ms.abs_diff(gs) + me.abs_diff(ge)) as f64 / 2.0)
}

/// Larger of the two endpoint Euclidean errors.
pub fn d_pixel(pred: &NormalizedDrag, gt: &GroundTruth) -> f64 {
    pred.start
        .distance(&gt.start_point)
        .max(pred.end.distance(&gt.end_point))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragScore {
    pub mapped: MappedEndpoints,
    pub b_dist: f64,
    pub d_pixel: f64,
    pub success: bool,
    pub reversed: bool,
    pub snap_used: bool,
}

/// Scores one triggered drag. A drag whose mapped start comes after its
/// mapped end is flipped first, since a desktop selection does not depend
/// on direction.
pub fn score_drag<S: SelectionSimulator + ?Sized>(
    doc: &Document,
    pred: &NormalizedDrag,
    gt: &GroundTruth,
    cfg: &EvalConfig,
    sim: &S,
) -> Result<DragScore, MetricError> {
    let mut pred = *pred;
    let mut mapped = map_drag(doc, &pred)?;
    let reversed = index_of(doc, mapped.start_word_id)? > index_of(doc, mapped.end_word_id)?;
    if reversed {
        std::mem::swap(&mut pred.start, &mut pred.end);
        std::mem::swap(&mut mapped.start_word_id, &mut mapped.end_word_id);
    }
    let b_dist = b_dist(doc, &mapped, gt)?;
    let d_pixel = d_pixel(&pred, gt);
    let (success, snap_used) = if b_dist != 0.0 {
        (false, false)
    } else if d_pixel < cfg.phi {
        (true, false)
    } else {
        let snapped = sim.simulate(doc, &DragGesture::new(pred.start, pred.end)) == Some(gt.range());
        (snapped, snapped)
    };
    Ok(DragScore {
        mapped,
        b_dist,
        d_pixel,
        success,
        reversed,
        snap_used,
    })
}

/// 1 when the drag selects exactly the ground-truth span, else 0.
pub fn success<S: SelectionSimulator + ?Sized>(
    doc: &Document,
    pred: &NormalizedDrag,
    gt: &GroundTruth,
    cfg: &EvalConfig,
    sim: &S,
) -> Result<u8, MetricError> {
    score_drag(doc, pred, gt, cfg, sim).map(|s| s.success as u8)
}

/// Full per-example result; `pred = None` means the model never dragged.
pub fn evaluate_example<S: SelectionSimulator + ?Sized>(
    example_id: &str,
    meta: ExampleMeta,
    doc: &Document,
    pred: Option<&NormalizedDrag>,
    gt: &GroundTruth,
    cfg: &EvalConfig,
    sim: &S,
) -> Result<MetricResult, MetricError> {
    let Some(pred) = pred else {
        return Ok(MetricResult::untriggered(example_id, meta));
    };
    let score = score_drag(doc, pred, gt, cfg, sim)?;
    let mid_line_snap = score.snap_used && !(doc.is_line_start(gt.start_word_id) || doc.is_line_end(gt.end_word_id));
    Ok(MetricResult {
        example_id: example_id.to_string(),
        meta,
        triggered: true,
        b_dist: Some(score.b_dist),
        d_pixel: Some(score.d_pixel),
        sr: Some(score.success as u8),
        mapped: Some(score.mapped),
        reversed: score.reversed,
        snap_used: score.snap_used,
        mid_line_snap,
        note: None,
    })
}

/// One aggregated row. Statistics are `None` when their denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: BTreeMap<GroupKey, String>,
    pub n: usize,
    pub triggered: usize,
    pub dtr: Option<f64>,
    pub mean_b_dist: Option<f64>,
    pub sr_rate: Option<f64>,
}

/// Associative running totals behind [`GroupRow`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub n: usize,
    pub triggered: usize,
    pub b_dist_sum: f64,
    pub successes: usize,
}

impl Tally {
    pub fn add(&mut self, r: &MetricResult) {
        self.n += 1;
        if r.triggered {
            self.triggered += 1;
            self.b_dist_sum += r.b_dist.unwrap_or(0.0);
            self.successes += usize::from(r.sr == Some(1));
        }
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            n: self.n + other.n,
            triggered: self.triggered + other.triggered,
            b_dist_sum: self.b_dist_sum + other.b_dist_sum,
            successes: self.successes + other.successes,
        }
    }

    pub fn row(&self, group: BTreeMap<GroupKey, String>, conditional: bool) -> GroupRow {
        let ratio = |num: f64, den: usize| (den > 0).then(|| num / den as f64);
        let sr_den = if conditional { self.triggered } else { self.n };
        GroupRow {
            group,
            n: self.n,
            triggered: self.triggered,
            dtr: ratio(self.triggered as f64, self.n),
            mean_b_dist: ratio(self.b_dist_sum, self.triggered),
            sr_rate: ratio(self.successes as f64, sr_den),
        }
    }
}

/// Row over every result.
pub fn summarize(results: &[MetricResult], cfg: &EvalConfig) -> Result<GroupRow, MetricError> {
    if results.is_empty() {
        return Err(MetricError::EmptyResults);
    }
    let mut tally = Tally::default();
    results.iter().for_each(|r| tally.add(r));
    Ok(tally.row(BTreeMap::new(), cfg.conditional_aggregation))
}

/// One row per combination of the listed keys' values, including combinations
/// with no examples, in declaration order of the values.
pub fn aggregate(results: &[MetricResult], keys: &[GroupKey], cfg: &EvalConfig) -> Result<Vec<GroupRow>, MetricError> {
    if results.is_empty() {
        return Err(MetricError::EmptyResults);
    }
    let mut keys: Vec<GroupKey> = keys.to_vec();
    keys.sort();
    keys.dedup();
    if keys.is_empty() {
        return Ok(vec![summarize(results, cfg)?]);
    }

    let mut combos: Vec<Vec<&'static str>> = vec![Vec::new()];
    for key in &keys {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                key.values().into_iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }

    let mut tallies: BTreeMap<Vec<&'static str>, Tally> = BTreeMap::new();
    for r in results {
        let combo: Vec<&'static str> = keys.iter().map(|k| r.meta.value_of(*k)).collect();
        tallies.entry(combo).or_default().add(r);
    }

    Ok(combos
        .into_iter()
        .map(|combo| {
            let tally = tallies.get(&combo).copied().unwrap_or_default();
            let group = keys.iter().zip(&combo).map(|(k, v)| (*k, v.to_string())).collect();
            tally.row(group, cfg.conditional_aggregation)
        })
        .collect())
}
