//! Word-level OCR documents and reading-order normalization.
//!
//! OCR engines emit boxes in whatever order their detector produced them.
//! Index-difference metrics only make sense once the boxes are put back into
//! visual reading order, so every consumer works on a [`Document`] that has
//! been through [`normalize_reading_order`].
//!
//! Line clustering: two boxes share a line when their vertical overlap is at
//! least half the smaller box height; the relation is closed transitively.
//! Words inside a line run by ascending `x_min` (then `y_min`, then id), and
//! lines run by ascending top edge (then leftmost `x_min`).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, GeometryError};

pub type WordId = u64;

/// Minimum vertical overlap, as a fraction of the shorter box, for two boxes
/// to land on the same line.
pub const LINE_OVERLAP_RATIO: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("duplicate word id {0}")]
    DuplicateId(WordId),
    #[error("word {id}: invalid bbox: {source}")]
    InvalidBBox {
        id: WordId,
        #[source]
        source: GeometryError,
    },
    #[error("word {id}: confidence out of range ({value})")]
    ConfidenceOutOfRange { id: WordId, value: f64 },
    #[error("word {0}: text is empty")]
    EmptyText(WordId),
    #[error("malformed OCR JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One entry of an OCR file: `{id, text, bbox: [x_min, y_min, x_max, y_max], confidence}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrRecord {
    pub id: WordId,
    pub text: String,
    pub bbox: [f64; 4],
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub id: WordId,
    pub text: String,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub line_index: usize,
    pub word_ids: Vec<WordId>,
    /// Union of the member boxes.
    pub bounds: BBox,
}

impl TextLine {
    pub fn center_y(&self) -> f64 {
        self.bounds.center_y()
    }

    pub fn height(&self) -> f64 {
        self.bounds.height()
    }
}

/// A set of OCR words for one screenshot.
///
/// `words` is always stored so that a word's position in the vector is its
/// reading index. Before normalization that is the input order and `lines`
/// is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub image_width: u32,
    pub image_height: u32,
    words: Vec<Word>,
    lines: Vec<TextLine>,
    reading_index: HashMap<WordId, usize>,
    /// `line_of[k]` is the line holding the word at reading index `k`.
    line_of: Vec<usize>,
    /// Reading index of each line's first word.
    line_starts: Vec<usize>,
}

impl Document {
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn lines(&self) -> &[TextLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        !self.lines.is_empty() || self.words.is_empty()
    }

    pub fn reading_index(&self, id: WordId) -> Option<usize> {
        self.reading_index.get(&id).copied()
    }

    pub fn reading_index_map(&self) -> &HashMap<WordId, usize> {
        &self.reading_index
    }

    pub fn word(&self, id: WordId) -> Option<&Word> {
        self.reading_index(id).map(|k| &self.words[k])
    }

    pub fn word_at(&self, reading_index: usize) -> Option<&Word> {
        self.words.get(reading_index)
    }

    /// Line index of the word at `reading_index`. Only meaningful after
    /// normalization.
    pub fn line_of(&self, reading_index: usize) -> Option<usize> {
        self.line_of.get(reading_index).copied()
    }

    /// Words of a line, in reading order, with the reading index of the first.
    pub fn line_words(&self, line_index: usize) -> Option<(usize, &[Word])> {
        let line = self.lines.get(line_index)?;
        let start = *self.line_starts.get(line_index)?;
        Some((start, &self.words[start..start + line.word_ids.len()]))
    }

    pub fn line(&self, line_index: usize) -> Option<&TextLine> {
        self.lines.get(line_index)
    }

    pub fn is_line_start(&self, id: WordId) -> bool {
        self.line_position(id)
            .is_some_and(|(line, _)| line.word_ids.first() == Some(&id))
    }

    pub fn is_line_end(&self, id: WordId) -> bool {
        self.line_position(id)
            .is_some_and(|(line, _)| line.word_ids.last() == Some(&id))
    }

    fn line_position(&self, id: WordId) -> Option<(&TextLine, usize)> {
        let k = self.reading_index(id)?;
        let line = self.lines.get(*self.line_of.get(k)?)?;
        Some((line, k))
    }

    /// Word texts joined by single spaces for reading indices `start..=end`.
    pub fn text_between(&self, start: usize, end: usize) -> String {
        self.words[start..=end]
            .iter()
            .map(|w| w.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn with_image_size(mut self, width: u32, height: u32) -> Self {
        self.image_width = width;
        self.image_height = height;
        self
    }

    /// Records in current word order; the inverse of [`parse_ocr`].
    pub fn to_records(&self) -> Vec<OcrRecord> {
        self.words
            .iter()
            .map(|w| OcrRecord {
                id: w.id,
                text: w.text.clone(),
                bbox: w.bbox.into(),
                confidence: w.confidence,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("OCR records always serialize")
    }

    /// Copy keeping only words accepted by `keep`, renormalized if this
    /// document was normalized.
    pub fn retain(&self, keep: impl Fn(&Word) -> bool) -> Document {
        let words: Vec<Word> = self.words.iter().filter(|w| keep(w)).cloned().collect();
        let doc = Document::from_words(words, self.image_width, self.image_height);
        if self.is_normalized() {
            normalize_reading_order(doc)
        } else {
            doc
        }
    }

    fn from_words(words: Vec<Word>, image_width: u32, image_height: u32) -> Document {
        let reading_index = words.iter().enumerate().map(|(k, w)| (w.id, k)).collect();
        Document {
            image_width,
            image_height,
            words,
            lines: Vec::new(),
            reading_index,
            line_of: Vec::new(),
            line_starts: Vec::new(),
        }
    }
}

/// Validates raw OCR records into an unordered [`Document`].
///
/// Image size defaults to the smallest canvas enclosing every box; use
/// [`Document::with_image_size`] when the real size is known.
pub fn parse_ocr(records: Vec<OcrRecord>) -> Result<Document, DocumentError> {
    let mut seen = HashMap::with_capacity(records.len());
    let mut words = Vec::with_capacity(records.len());
    let (mut width, mut height) = (0.0f64, 0.0f64);
    for (k, r) in records.into_iter().enumerate() {
        if seen.insert(r.id, k).is_some() {
            return Err(DocumentError::DuplicateId(r.id));
        }
        let bbox = BBox::try_from(r.bbox).map_err(|source| DocumentError::InvalidBBox { id: r.id, source })?;
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(DocumentError::ConfidenceOutOfRange {
                id: r.id,
                value: r.confidence,
            });
        }
        if r.text.trim().is_empty() {
            return Err(DocumentError::EmptyText(r.id));
        }
        width = width.max(bbox.x_max);
        height = height.max(bbox.y_max);
        words.push(Word {
            id: r.id,
            text: r.text,
            bbox,
            confidence: r.confidence,
        });
    }
    Ok(Document::from_words(words, width.ceil() as u32, height.ceil() as u32))
}

pub fn parse_ocr_json(json: &str) -> Result<Document, DocumentError> {
    let records: Vec<OcrRecord> = serde_json::from_str(json)?;
    parse_ocr(records)
}

pub fn load_ocr_file(path: &Path) -> Result<Document, DocumentError> {
    let text = std::fs::read_to_string(path).map_err(|source| DocumentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ocr_json(&text)
}

/// Clusters words into lines and reorders them left-to-right, top-to-bottom.
///
/// The result depends only on the set of words, not on their input order.
pub fn normalize_reading_order(doc: Document) -> Document {
    let Document {
        image_width,
        image_height,
        words,
        ..
    } = doc;
    if words.is_empty() {
        return Document::from_words(words, image_width, image_height);
    }

    let clusters = cluster_lines(&words);

    let mut lines: Vec<Vec<Word>> = {
        let mut by_root: HashMap<usize, Vec<Word>> = HashMap::new();
        for (word, root) in words.into_iter().zip(clusters) {
            by_root.entry(root).or_default().push(word);
        }
        by_root.into_values().collect()
    };
    for line in &mut lines {
        line.sort_by(in_line_order);
    }
    let bounds: Vec<BBox> = lines.iter().map(|l| line_bounds(l)).collect();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (&bounds[a], &bounds[b]);
        la.y_min
            .total_cmp(&lb.y_min)
            .then(la.x_min.total_cmp(&lb.x_min))
            .then(min_id(&lines[a]).cmp(&min_id(&lines[b])))
    });

    let mut slots: Vec<Option<Vec<Word>>> = lines.into_iter().map(Some).collect();
    let mut ordered_words = Vec::new();
    let mut text_lines = Vec::with_capacity(order.len());
    let mut line_of = Vec::new();
    let mut line_starts = Vec::with_capacity(order.len());
    for (line_index, &slot) in order.iter().enumerate() {
        let members = slots[slot].take().expect("each line is visited once");
        line_starts.push(ordered_words.len());
        text_lines.push(TextLine {
            line_index,
            word_ids: members.iter().map(|w| w.id).collect(),
            bounds: bounds[slot],
        });
        line_of.extend(std::iter::repeat_n(line_index, members.len()));
        ordered_words.extend(members);
    }

    let mut doc = Document::from_words(ordered_words, image_width, image_height);
    doc.lines = text_lines;
    doc.line_of = line_of;
    doc.line_starts = line_starts;
    doc
}

fn in_line_order(a: &Word, b: &Word) -> Ordering {
    a.bbox
        .x_min
        .total_cmp(&b.bbox.x_min)
        .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
        .then(a.id.cmp(&b.id))
}

fn min_id(words: &[Word]) -> WordId {
    words.iter().map(|w| w.id).min().unwrap_or_default()
}

fn line_bounds(words: &[Word]) -> BBox {
    words.iter().skip(1).fold(words[0].bbox, |acc, w| acc.union(&w.bbox))
}

pub(crate) fn same_line(a: &BBox, b: &BBox) -> bool {
    let overlap = a.vertical_overlap(b);
    overlap >= 0.0 && overlap >= LINE_OVERLAP_RATIO * a.height().min(b.height())
}

/// Union-find over the same-line relation. Returns a cluster root per word.
fn cluster_lines(words: &[Word]) -> Vec<usize> {
    let n = words.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    // Sweep by top edge so only vertically intersecting pairs are compared.
    let mut by_top: Vec<usize> = (0..n).collect();
    by_top.sort_by(|&a, &b| words[a].bbox.y_min.total_cmp(&words[b].bbox.y_min));
    for (pos, &i) in by_top.iter().enumerate() {
        let bi = &words[i].bbox;
        for &j in &by_top[pos + 1..] {
            let bj = &words[j].bbox;
            if bj.y_min > bi.y_max {
                break;
            }
            if same_line(bi, bj) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}
