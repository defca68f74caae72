//! Fixtures and brute-force reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use dragbench::document::{normalize_reading_order, parse_ocr, Document, OcrRecord, WordId};
use dragbench::geometry::Point;
use dragbench::selection::SelectionRange;
use dragbench::taxonomy::*;
use rand::Rng;

pub fn rec(id: WordId, text: &str, bbox: [f64; 4]) -> OcrRecord {
    OcrRecord {
        id,
        text: text.into(),
        bbox,
        confidence: 0.9,
    }
}

pub fn doc(records: Vec<OcrRecord>) -> Document {
    normalize_reading_order(parse_ocr(records).expect("valid fixture"))
}

pub fn meta(density: Density) -> ExampleMeta {
    ExampleMeta {
        interface_level: InterfaceLevel::Document,
        density,
        category: Category::Lexical,
        granularity: Granularity::Sentence,
        form: Form::Explicit,
        application: Application::Pdf,
    }
}

/// Rows of equally sized words: `rows[r]` words on row `r`, each `w` wide
/// with `gap` between them, rows `h` tall with `lead` between them. Ids and
/// texts follow reading order (`w0`, `w1`, ...).
pub fn grid_records(rows: &[usize], w: f64, h: f64, gap: f64, lead: f64) -> Vec<OcrRecord> {
    let mut out = Vec::new();
    for (r, &n) in rows.iter().enumerate() {
        let y = 10.0 + r as f64 * (h + lead);
        for c in 0..n {
            let x = 10.0 + c as f64 * (w + gap);
            let id = out.len() as WordId;
            out.push(rec(id, &format!("w{id}"), [x, y, x + w, y + h]));
        }
    }
    out
}

/// Arbitrary boxes with integer corners inside `canvas`, possibly overlapping.
pub fn random_records(rng: &mut impl Rng, n: usize, canvas: u32, max_side: u32) -> Vec<OcrRecord> {
    (0..n)
        .map(|i| {
            let w = rng.random_range(1..=max_side) as f64;
            let h = rng.random_range(1..=max_side) as f64;
            let x = rng.random_range(0..=(canvas - w as u32)) as f64;
            let y = rng.random_range(0..=(canvas - h as u32)) as f64;
            rec(i as WordId, &format!("t{i}"), [x, y, x + w, y + h])
        })
        .collect()
}

/// Non-overlapping rows of positive-width words drawn from `vocab`, laid out
/// left to right with random widths and gaps.
pub fn random_text_records(rng: &mut impl Rng, n: usize, vocab: &[&str], per_row: usize) -> Vec<OcrRecord> {
    let mut out = Vec::new();
    let mut x = 5.0;
    let mut row = 0usize;
    for i in 0..n {
        if i > 0 && i % per_row == 0 {
            row += 1;
            x = 5.0;
        }
        let w = rng.random_range(8..40) as f64;
        let y = 5.0 + row as f64 * 30.0;
        let text = vocab[rng.random_range(0..vocab.len())];
        out.push(rec(i as WordId, text, [x, y, x + w, y + 16.0]));
        x += w + rng.random_range(4..12) as f64;
    }
    out
}

struct RefLine {
    center: f64,
    y_min: f64,
    y_max: f64,
}

/// Line geometry recomputed from membership alone.
fn ref_lines(d: &Document) -> Vec<RefLine> {
    (0..d.lines().len())
        .map(|i| {
            let members: Vec<_> = (0..d.len()).filter(|&k| d.line_of(k) == Some(i)).collect();
            let y_min = members
                .iter()
                .map(|&k| d.words()[k].bbox.y_min)
                .fold(f64::INFINITY, f64::min);
            let y_max = members
                .iter()
                .map(|&k| d.words()[k].bbox.y_max)
                .fold(f64::NEG_INFINITY, f64::max);
            RefLine {
                center: (y_min + y_max) / 2.0,
                y_min,
                y_max,
            }
        })
        .collect()
}

fn inside(b: &dragbench::geometry::BBox, p: Point) -> bool {
    b.x_min <= p.x && p.x <= b.x_max && b.y_min <= p.y && p.y <= b.y_max
}

fn hgap(b: &dragbench::geometry::BBox, x: f64) -> f64 {
    if x < b.x_min {
        b.x_min - x
    } else if x > b.x_max {
        x - b.x_max
    } else {
        0.0
    }
}

fn lex_min<K: PartialOrd + Copy>(keys: impl Iterator<Item = (K, usize)>) -> usize {
    let mut all: Vec<(K, usize)> = keys.collect();
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite keys"));
    all[0].1
}

/// Reading index the metric mapping should pick for `p`, found by ranking
/// every word under one lexicographic key.
pub fn oracle_map_index(d: &Document, p: Point) -> usize {
    let lines = ref_lines(d);
    let words = d.words();
    if words.iter().any(|w| inside(&w.bbox, p)) {
        return lex_min(
            (0..words.len())
                .filter(|&k| inside(&words[k].bbox, p))
                .map(|k| ((words[k].bbox.area(), k as f64), k)),
        );
    }
    lex_min((0..words.len()).map(|k| {
        let li = d.line_of(k).expect("normalized");
        (
            (
                (lines[li].center - p.y).abs(),
                li as f64,
                hgap(&words[k].bbox, p.x),
                k as f64,
            ),
            k,
        )
    }))
}

/// Boundary a caret at `p` lands on, enumerated over every (word, side)
/// candidate.
pub fn oracle_boundary(d: &Document, p: Point) -> usize {
    let lines = ref_lines(d);
    let words = d.words();
    let word = if words.iter().any(|w| inside(&w.bbox, p)) {
        lex_min(
            (0..words.len())
                .filter(|&k| inside(&words[k].bbox, p))
                .map(|k| ((words[k].bbox.area(), k as f64), k)),
        )
    } else {
        lex_min((0..words.len()).map(|k| {
            let li = d.line_of(k).expect("normalized");
            let l = &lines[li];
            let pad = 0.5 * (l.y_max - l.y_min);
            let out_of_band = if l.y_min - pad <= p.y && p.y <= l.y_max + pad {
                0.0
            } else {
                1.0
            };
            (
                (
                    out_of_band,
                    (l.center - p.y).abs(),
                    li as f64,
                    hgap(&words[k].bbox, p.x),
                    k as f64,
                ),
                k,
            )
        }))
    };
    let b = &words[word].bbox;
    // Nearest edge wins; a point exactly at the center goes after the word.
    let to_left = (p.x - b.x_min).abs();
    let to_right = (b.x_max - p.x).abs();
    if p.x < b.x_min || (p.x <= b.x_max && to_left < to_right) {
        word
    } else {
        word + 1
    }
}

/// Words strictly between two boundaries.
pub fn oracle_range(d: &Document, a: usize, b: usize) -> Option<SelectionRange> {
    let covered: Vec<usize> = (0..d.len()).filter(|&k| a.min(b) <= k && k < a.max(b)).collect();
    Some(SelectionRange {
        start_word_id: d.words()[*covered.first()?].id,
        end_word_id: d.words()[*covered.last()?].id,
    })
}

/// Number of word-aligned positions where `tokens` occurs in the document.
pub fn occurrence_count(d: &Document, tokens: &[&str]) -> usize {
    let words: Vec<&str> = d.words().iter().map(|w| w.text.as_str()).collect();
    if tokens.is_empty() || tokens.len() > words.len() {
        return 0;
    }
    words.windows(tokens.len()).filter(|w| *w == tokens).count()
}

/// A benchmark-shaped dataset with a prediction per record.
///
/// Each record holds 18 to 42 words in rows of six; predictions mix exact
/// drags, small pixel offsets, reversed drags, two-step transcripts, clicks
/// and missing entries.
pub fn synthetic_dataset(
    n: usize,
    seed: u64,
) -> (
    Vec<dragbench::harness::DatasetRecord>,
    Vec<dragbench::harness::PredictionRecord>,
) {
    use dragbench::action::{Action, Dialect};
    use dragbench::grounding::derive_drag_coordinates;
    use dragbench::harness::{DatasetRecord, PredictionRecord};
    use rand::SeedableRng;

    const VOCAB: &[&str] = &[
        "the", "drag", "text", "span", "of", "a", "line", "word", "select", "box",
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n);
    for i in 0..n {
        let words = rng.random_range(18..=42);
        let ocr = random_text_records(&mut rng, words, VOCAB, 6);
        let d = doc(ocr.clone());
        let s = rng.random_range(0..words);
        let e = rng.random_range(s..words.min(s + 8));
        let (sid, eid) = (d.words()[s].id, d.words()[e].id);
        let (sp, ep) = derive_drag_coordinates(&d, sid, eid).expect("ordered range");
        let pick = |rng: &mut rand_chacha::ChaCha8Rng, all: &[&'static str]| all[rng.random_range(0..all.len())];
        let id = format!("ex{i:05}");
        let record: DatasetRecord = serde_json::from_value(serde_json::json!({
            "example_id": id,
            "image": format!("img/{i:05}.png"),
            "instruction": format!("Select the text from word {sid} to word {eid}."),
            "form": pick(&mut rng, &["explicit", "implicit"]),
            "category": pick(&mut rng, &["semantic", "positional", "visual", "lexical", "compositional"]),
            "granularity": pick(&mut rng, &["sentence", "multi_sentence", "paragraph", "multi_paragraph", "multi_words"]),
            "interface_level": pick(&mut rng, &["document", "application", "desktop"]),
            "density": pick(&mut rng, &["sparse", "dense"]),
            "application": pick(&mut rng, &["pdf", "pptx", "docx"]),
            "ocr": ocr,
            "gt_start_id": sid,
            "gt_end_id": eid,
            "gt_start_point": sp,
            "gt_end_point": ep,
        }))
        .expect("generated record matches the schema");
        records.push(record);

        let jitter = |rng: &mut rand_chacha::ChaCha8Rng, p: Point, r: f64| {
            Point::new(p.x + rng.random_range(-r..=r), p.y + rng.random_range(-r..=r))
        };
        let roll = rng.random_range(0..100);
        let pred = match roll {
            0..=29 => Some(PredictionRecord::from_actions(
                &id,
                vec![Action::Drag { start: sp, end: ep }],
            )),
            30..=54 => {
                let (a, b) = (jitter(&mut rng, sp, 6.0), jitter(&mut rng, ep, 6.0));
                Some(PredictionRecord::from_actions(
                    &id,
                    vec![Action::Drag { start: a, end: b }],
                ))
            }
            55..=64 => Some(PredictionRecord::from_actions(
                &id,
                vec![Action::Drag { start: ep, end: sp }],
            )),
            65..=79 => Some(PredictionRecord::from_transcript(
                &id,
                format!(
                    "move_to({:.1}, {:.1})\ndrag_to({:.1}, {:.1})",
                    sp.x,
                    sp.y,
                    ep.x + 1.0,
                    ep.y
                ),
                Dialect::TwoStep,
            )),
            80..=94 => Some(PredictionRecord::from_actions(&id, vec![Action::Click(sp)])),
            _ => None,
        };
        preds.extend(pred);
    }
    (records, preds)
}

pub fn to_jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("serializable"));
        out.push('\n');
    }
    out
}
