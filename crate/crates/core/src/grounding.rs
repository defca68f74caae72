//! Grounding a target text span onto consecutive OCR words, and deriving the
//! ground-truth drag points for a grounded span.
//!
//! Matching is case-sensitive with punctuation intact. Whitespace is
//! collapsed to single spaces on both sides, and a match has to start and end
//! on word boundaries. The earliest match in reading order wins.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{Document, WordId};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("word id {0} is not in the document")]
    UnknownWord(WordId),
    #[error("start word {start} comes after end word {end} in reading order")]
    Reversed { start: WordId, end: WordId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingStatus {
    Grounded,
    NotGrounded,
}

/// Grounding outcome; serializes to `{status, start_id, end_id, notes}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub status: GroundingStatus,
    pub start_id: Option<WordId>,
    pub end_id: Option<WordId>,
    pub notes: String,
    /// Number of word-aligned exact occurrences of the span.
    #[serde(skip)]
    pub occurrences: usize,
    /// Token edits spent by a fuzzy match.
    #[serde(skip)]
    pub edits: usize,
}

impl GroundingResult {
    pub fn is_grounded(&self) -> bool {
        self.status == GroundingStatus::Grounded
    }

    pub fn not_grounded(notes: impl Into<String>) -> Self {
        Self {
            status: GroundingStatus::NotGrounded,
            start_id: None,
            end_id: None,
            notes: notes.into(),
            occurrences: 0,
            edits: 0,
        }
    }

    fn grounded(start: WordId, end: WordId, notes: String) -> Self {
        Self {
            status: GroundingStatus::Grounded,
            start_id: Some(start),
            end_id: Some(end),
            notes,
            occurrences: 1,
            edits: 0,
        }
    }

    /// The result is an exact match that is not unique in the document.
    pub fn is_ambiguous(&self) -> bool {
        self.occurrences > 1
    }
}

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace tokens of every word, in reading order.
struct TokenStream<'a> {
    tokens: Vec<&'a str>,
    /// Reading index of the word each token came from.
    word_of: Vec<usize>,
    /// First token of each word; `first[len]` is the total token count.
    first: Vec<usize>,
}

impl<'a> TokenStream<'a> {
    fn new(doc: &'a Document) -> Self {
        let mut tokens = Vec::new();
        let mut word_of = Vec::new();
        let mut first = Vec::with_capacity(doc.len() + 1);
        for (k, w) in doc.words().iter().enumerate() {
            first.push(tokens.len());
            for t in w.text.split_whitespace() {
                tokens.push(t);
                word_of.push(k);
            }
        }
        first.push(tokens.len());
        Self { tokens, word_of, first }
    }

    fn is_word_end(&self, t: usize) -> bool {
        t == self.tokens.len() || self.first[self.word_of[t]] == t
    }

    /// Reading indices `(i, j)` of every exact word-aligned occurrence.
    fn exact_matches(&self, span: &[&str]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let n_words = self.first.len() - 1;
        for i in 0..n_words {
            let t0 = self.first[i];
            let t1 = t0 + span.len();
            if t1 > self.tokens.len() || t0 == self.first[i + 1] {
                continue;
            }
            if self.tokens[t0..t1] == *span && self.is_word_end(t1) {
                out.push((i, self.word_of[t1 - 1]));
            }
        }
        out
    }
}

/// Grounds `span` on the first consecutive run of words whose text equals it.
pub fn ground_span(doc: &Document, span: &str) -> GroundingResult {
    let normalized = normalize_whitespace(span);
    if normalized.is_empty() {
        return GroundingResult::not_grounded("target span is empty after whitespace normalization");
    }
    let span_tokens: Vec<&str> = normalized.split(' ').collect();
    let stream = TokenStream::new(doc);
    let matches = stream.exact_matches(&span_tokens);
    let Some(&(i, j)) = matches.first() else {
        return GroundingResult::not_grounded(format!("no consecutive OCR words match \"{normalized}\" exactly"));
    };
    let words = doc.words();
    let mut notes = format!("matched \"{normalized}\" on words {}..{}", words[i].id, words[j].id);
    if matches.len() > 1 {
        let _ = write!(
            notes,
            "; span occurs {} times, chose the first in reading order",
            matches.len()
        );
    }
    let mut result = GroundingResult::grounded(words[i].id, words[j].id, notes);
    result.occurrences = matches.len();
    result
}

/// Kinds of token edit a fuzzy match may spend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
struct EditCounts {
    merges: usize,
    splits: usize,
    substitutions: usize,
}

impl EditCounts {
    fn total(&self) -> usize {
        self.merges + self.splits + self.substitutions
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        for (n, what) in [
            (self.merges, "merge"),
            (self.splits, "split"),
            (self.substitutions, "substitution"),
        ] {
            if n > 0 {
                parts.push(format!("{n} {what}{}", if n == 1 { "" } else { "s" }));
            }
        }
        parts.join(", ")
    }
}

fn one_char_substitution(a: &str, b: &str) -> bool {
    let (mut ia, mut ib) = (a.chars(), b.chars());
    let mut diffs = 0;
    loop {
        match (ia.next(), ib.next()) {
            (None, None) => return diffs == 1,
            (Some(x), Some(y)) => {
                if x != y {
                    diffs += 1;
                    if diffs > 1 {
                        return false;
                    }
                }
            }
            _ => return false,
        }
    }
}

fn joined_equals(target: &str, left: &str, right: &str) -> bool {
    target.len() == left.len() + right.len() && target.starts_with(left) && target.ends_with(right)
}

/// `left` ends in a hyphen and, with it dropped, `left + right == target`.
fn dehyphenated_equals(target: &str, left: &str, right: &str) -> bool {
    left.strip_suffix('-')
        .is_some_and(|stem| !stem.is_empty() && joined_equals(target, stem, right))
}

/// Cheapest alignment of `span` against tokens starting at `t0`, for every
/// word-aligned end position. Returns `(end_token_exclusive, edits)`.
fn align_from(stream: &TokenStream<'_>, span: &[&str], t0: usize, max_edits: usize) -> Vec<(usize, EditCounts)> {
    let m = span.len();
    let width = (2 * m).min(stream.tokens.len() - t0) + 1;
    let mut best: Vec<Vec<Option<EditCounts>>> = vec![vec![None; width]; m + 1];
    best[0][0] = Some(EditCounts::default());

    let relax = |best: &mut Vec<Vec<Option<EditCounts>>>, s: usize, dt: usize, e: EditCounts| {
        if dt >= width || e.total() > max_edits {
            return;
        }
        let slot = &mut best[s][dt];
        let better = match slot {
            None => true,
            Some(cur) => (e.total(), e) < (cur.total(), *cur),
        };
        if better {
            *slot = Some(e);
        }
    };

    for s in 0..m {
        for dt in 0..width {
            let Some(e) = best[s][dt] else { continue };
            let t = t0 + dt;
            let Some(&tok) = stream.tokens.get(t) else { continue };
            if span[s] == tok {
                relax(&mut best, s + 1, dt + 1, e);
            } else if one_char_substitution(span[s], tok) {
                relax(
                    &mut best,
                    s + 1,
                    dt + 1,
                    EditCounts {
                        substitutions: e.substitutions + 1,
                        ..e
                    },
                );
            }
            if let Some(&next) = stream.tokens.get(t + 1) {
                if joined_equals(span[s], tok, next) || dehyphenated_equals(span[s], tok, next) {
                    relax(
                        &mut best,
                        s + 1,
                        dt + 2,
                        EditCounts {
                            merges: e.merges + 1,
                            ..e
                        },
                    );
                }
            }
            if s + 1 < m && joined_equals(tok, span[s], span[s + 1]) {
                relax(
                    &mut best,
                    s + 2,
                    dt + 1,
                    EditCounts {
                        splits: e.splits + 1,
                        ..e
                    },
                );
            }
        }
    }

    (1..width)
        .filter_map(|dt| best[m][dt].map(|e| (t0 + dt, e)))
        .filter(|(t, _)| stream.is_word_end(*t))
        .collect()
}

/// Like [`ground_span`] but tolerating up to `max_edits` token edits: two OCR
/// words merged into one span token (including a hyphenated break), one OCR
/// word split into two span tokens, or a single-character substitution.
///
/// A perfect match is always preferred and resolved exactly as in
/// [`ground_span`]. Among imperfect matches, two distinct word ranges at the
/// same minimal cost are reported as ambiguous.
pub fn fuzzy_ground_span(doc: &Document, span: &str, max_edits: usize) -> GroundingResult {
    let exact = ground_span(doc, span);
    if exact.is_grounded() || max_edits == 0 {
        return exact;
    }
    let normalized = normalize_whitespace(span);
    if normalized.is_empty() {
        return exact;
    }
    let span_tokens: Vec<&str> = normalized.split(' ').collect();
    let stream = TokenStream::new(doc);

    let mut candidates: Vec<(usize, usize, EditCounts)> = Vec::new();
    for i in 0..doc.len() {
        let t0 = stream.first[i];
        if t0 == stream.first[i + 1] {
            continue;
        }
        for (t_end, edits) in align_from(&stream, &span_tokens, t0, max_edits) {
            candidates.push((i, stream.word_of[t_end - 1], edits));
        }
    }
    let Some(min_cost) = candidates.iter().map(|c| c.2.total()).min() else {
        return GroundingResult::not_grounded(format!(
            "no consecutive OCR words match \"{normalized}\" within {max_edits} edit(s)"
        ));
    };
    let mut best: Vec<&(usize, usize, EditCounts)> = candidates.iter().filter(|c| c.2.total() == min_cost).collect();
    best.sort_by_key(|c| (c.0, c.1, c.2));
    best.dedup_by_key(|c| (c.0, c.1));
    let words = doc.words();
    if best.len() > 1 {
        let ranges: Vec<String> = best
            .iter()
            .map(|c| format!("{}..{}", words[c.0].id, words[c.1].id))
            .collect();
        return GroundingResult::not_grounded(format!(
            "ambiguous: {} candidate ranges at {min_cost} edit(s): {}",
            best.len(),
            ranges.join(", ")
        ));
    }
    let (i, j, edits) = *best[0];
    let mut result = GroundingResult::grounded(
        words[i].id,
        words[j].id,
        format!(
            "matched \"{normalized}\" on words {}..{} with {}",
            words[i].id,
            words[j].id,
            edits.describe()
        ),
    );
    result.edits = edits.total();
    result
}

/// Ground-truth drag points for a span: the midpoint of the start word's
/// left edge and the midpoint of the end word's right edge.
pub fn derive_drag_coordinates(
    doc: &Document,
    start_id: WordId,
    end_id: WordId,
) -> Result<(Point, Point), GroundingError> {
    let si = doc
        .reading_index(start_id)
        .ok_or(GroundingError::UnknownWord(start_id))?;
    let ei = doc.reading_index(end_id).ok_or(GroundingError::UnknownWord(end_id))?;
    if si > ei {
        return Err(GroundingError::Reversed {
            start: start_id,
            end: end_id,
        });
    }
    let s = &doc.words()[si].bbox;
    let e = &doc.words()[ei].bbox;
    Ok((Point::new(s.x_min, s.center_y()), Point::new(e.x_max, e.center_y())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{normalize_reading_order, parse_ocr, OcrRecord};

    fn line_doc(texts: &[&str]) -> Document {
        let records = texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let x = 50.0 * i as f64;
                OcrRecord {
                    id: i as WordId,
                    text: t.to_string(),
                    bbox: [x, 10.0, x + 40.0, 30.0],
                    confidence: 1.0,
                }
            })
            .collect();
        normalize_reading_order(parse_ocr(records).unwrap())
    }

    #[test]
    fn direct_match() {
        let doc = line_doc(&["Drag", "to", "select", "text."]);
        let r = ground_span(&doc, "to select");
        assert_eq!(
            (r.status, r.start_id, r.end_id),
            (GroundingStatus::Grounded, Some(1), Some(2))
        );
        let r = ground_span(&doc, "  text. ");
        assert_eq!((r.start_id, r.end_id), (Some(3), Some(3)));
    }

    #[test]
    fn reordered_or_partial_is_rejected() {
        let doc = line_doc(&["Drag", "to", "select", "text."]);
        assert!(!ground_span(&doc, "select to").is_grounded());
        assert!(!ground_span(&doc, "text").is_grounded());
        assert!(!ground_span(&doc, "drag to").is_grounded());
        assert!(!ground_span(&doc, "Drag select").is_grounded());
        let r = ground_span(&doc, "   ");
        assert!(!r.is_grounded() && r.start_id.is_none() && r.end_id.is_none());
    }

    #[test]
    fn repeated_span_takes_first_and_flags_it() {
        let doc = line_doc(&["a", "b", "c", "a", "b"]);
        let r = ground_span(&doc, "a b");
        assert_eq!((r.start_id, r.end_id), (Some(0), Some(1)));
        assert_eq!(r.occurrences, 2);
        assert!(r.notes.contains("2 times"));
    }

    #[test]
    fn words_with_internal_spaces() {
        let doc = line_doc(&["New  York", "City"]);
        let r = ground_span(&doc, "New York City");
        assert_eq!((r.start_id, r.end_id), (Some(0), Some(1)));
        // Must start on a word boundary.
        assert!(!ground_span(&doc, "York City").is_grounded());
    }

    #[test]
    fn json_schema() {
        let doc = line_doc(&["x", "y"]);
        let json = serde_json::to_value(ground_span(&doc, "y")).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 4);
        assert_eq!(json["status"], "grounded");
        assert_eq!(json["start_id"], 1);
        let json = serde_json::to_value(ground_span(&doc, "z")).unwrap();
        assert_eq!(json["status"], "not_grounded");
        assert!(json["start_id"].is_null() && json["end_id"].is_null());
    }

    #[test]
    fn fuzzy_merge_split_substitution() {
        let doc = line_doc(&["I", "can", "not", "go"]);
        let r = fuzzy_ground_span(&doc, "I cannot go", 1);
        assert_eq!((r.start_id, r.end_id, r.edits), (Some(0), Some(3), 1));
        assert!(r.notes.contains("1 merge"), "{}", r.notes);
        assert!(!fuzzy_ground_span(&doc, "I cannot go", 0).is_grounded());

        let doc = line_doc(&["toselect", "the", "te xt"]);
        let r = fuzzy_ground_span(&doc, "to select the text", 2);
        assert_eq!((r.start_id, r.end_id, r.edits), (Some(0), Some(2), 2));
        assert!(
            r.notes.contains("1 merge") && r.notes.contains("1 split"),
            "{}",
            r.notes
        );

        let doc = line_doc(&["Drag", "t0", "select"]);
        let r = fuzzy_ground_span(&doc, "to select", 1);
        assert_eq!((r.start_id, r.end_id), (Some(1), Some(2)));
        assert!(r.notes.contains("substitution"));
    }

    #[test]
    fn fuzzy_hyphenated_break() {
        let doc = line_doc(&["inter-", "national", "law"]);
        let r = fuzzy_ground_span(&doc, "international law", 1);
        assert_eq!((r.start_id, r.end_id), (Some(0), Some(2)));
    }

    #[test]
    fn fuzzy_ambiguity() {
        let doc = line_doc(&["can", "not", "x", "can", "not"]);
        let r = fuzzy_ground_span(&doc, "cannot", 1);
        assert!(!r.is_grounded());
        assert!(r.notes.starts_with("ambiguous"), "{}", r.notes);
        // A perfect match anywhere beats imperfect ones.
        let doc = line_doc(&["cat", "bat", "cat"]);
        let r = fuzzy_ground_span(&doc, "bat", 1);
        assert_eq!(r.start_id, Some(1));
    }

    #[test]
    fn derive_points() {
        let doc = normalize_reading_order(
            parse_ocr(vec![
                OcrRecord {
                    id: 0,
                    text: "a".into(),
                    bbox: [10.0, 20.0, 50.0, 40.0],
                    confidence: 1.0,
                },
                OcrRecord {
                    id: 1,
                    text: "b".into(),
                    bbox: [60.0, 20.0, 100.0, 44.0],
                    confidence: 1.0,
                },
            ])
            .unwrap(),
        );
        let (s, e) = derive_drag_coordinates(&doc, 0, 1).unwrap();
        assert_eq!(s, Point::new(10.0, 30.0));
        assert_eq!(e, Point::new(100.0, 32.0));
        let (s, e) = derive_drag_coordinates(&doc, 1, 1).unwrap();
        assert_eq!((s, e), (Point::new(60.0, 32.0), Point::new(100.0, 32.0)));
        assert_eq!(derive_drag_coordinates(&doc, 0, 7), Err(GroundingError::UnknownWord(7)));
        assert_eq!(
            derive_drag_coordinates(&doc, 1, 0),
            Err(GroundingError::Reversed { start: 1, end: 0 })
        );
    }
}
