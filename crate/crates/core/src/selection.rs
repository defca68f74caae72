//! Word-granularity model of an OS text-selection drag.
//!
//! A caret sits before or after a word. Carets map onto the `N + 1`
//! boundaries between words in reading order (`before k` is boundary `k`,
//! `after k` is boundary `k + 1`), so "after the last word of a line" and
//! "before the first word of the next line" are the same position. A drag
//! selects every word between its two boundaries.
//!
//! Caret placement for a point:
//! 1. inside a word box: that word (smallest box, then earliest in reading
//!    order, when boxes overlap);
//! 2. otherwise the target line is the one whose band (extent grown by half
//!    its height on each side) contains the point, nearest vertical center
//!    first; with no band hit, the nearest vertical center overall. Inside
//!    the line the word with the smallest horizontal distance wins.
//!
//! The side is `before` when the point is left of the word's horizontal
//! center, `after` otherwise. Overshooting past a line end therefore snaps to
//! the line boundary.

use serde::{Deserialize, Serialize};

use crate::document::{Document, WordId};
use crate::geometry::Point;

/// Fraction of a line's height added above and below it when deciding which
/// line a point belongs to.
pub const LINE_BAND_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Before,
    After,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Caret {
    pub word_id: WordId,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragGesture {
    pub start: Point,
    pub end: Point,
}

impl DragGesture {
    pub fn new(start: Point, end: Point) -> Self {
        Self { start, end }
    }

    pub fn reversed(&self) -> Self {
        Self {
            start: self.end,
            end: self.start,
        }
    }
}

/// Inclusive word range in reading order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionRange {
    pub start_word_id: WordId,
    pub end_word_id: WordId,
}

/// Full outcome of a simulated drag, for tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSelection {
    pub start_caret: Caret,
    pub end_caret: Caret,
    pub range: Option<SelectionRange>,
}

/// Caret for a point, or `None` on an empty document.
pub fn place_caret(doc: &Document, p: Point) -> Option<Caret> {
    let k = caret_word(doc, p)?;
    let word = &doc.words()[k];
    let side = if p.x < word.bbox.center_x() {
        Side::Before
    } else {
        Side::After
    };
    Some(Caret { word_id: word.id, side })
}

/// Reading index of the word a caret at `p` attaches to.
fn caret_word(doc: &Document, p: Point) -> Option<usize> {
    if doc.is_empty() {
        return None;
    }
    let mut container: Option<(f64, usize)> = None;
    for (k, w) in doc.words().iter().enumerate() {
        if w.bbox.contains(p) {
            let area = w.bbox.area();
            if container.is_none_or(|(best, _)| area < best) {
                container = Some((area, k));
            }
        }
    }
    if let Some((_, k)) = container {
        return Some(k);
    }

    let (start, words) = doc.line_words(target_line(doc, p.y)?)?;
    let mut best: Option<(f64, usize)> = None;
    for (k, w) in words.iter().enumerate() {
        let d = w.bbox.horizontal_distance(p);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, k));
        }
    }
    best.map(|(_, k)| start + k)
}

fn target_line(doc: &Document, y: f64) -> Option<usize> {
    let mut best: Option<(bool, f64, usize)> = None;
    for line in doc.lines() {
        let pad = LINE_BAND_RATIO * line.height();
        let in_band = line.bounds.y_min - pad <= y && y <= line.bounds.y_max + pad;
        let dist = (line.center_y() - y).abs();
        let better = match best {
            None => true,
            Some((b_band, b_dist, _)) => (in_band && !b_band) || (in_band == b_band && dist < b_dist),
        };
        if better {
            best = Some((in_band, dist, line.line_index));
        }
    }
    best.map(|(_, _, idx)| idx)
}

/// Boundary index of a caret: `before k` is `k`, `after k` is `k + 1`.
pub fn caret_boundary(doc: &Document, caret: Caret) -> Option<usize> {
    let k = doc.reading_index(caret.word_id)?;
    Some(match caret.side {
        Side::Before => k,
        Side::After => k + 1,
    })
}

/// Words covered between two boundaries, `None` when they coincide.
pub fn range_between(doc: &Document, a: usize, b: usize) -> Option<SelectionRange> {
    let (lo, hi) = (a.min(b), a.max(b));
    if lo == hi {
        return None;
    }
    Some(SelectionRange {
        start_word_id: doc.word_at(lo)?.id,
        end_word_id: doc.word_at(hi - 1)?.id,
    })
}

pub fn simulate_detailed(doc: &Document, g: &DragGesture) -> Option<SimulatedSelection> {
    let start_caret = place_caret(doc, g.start)?;
    let end_caret = place_caret(doc, g.end)?;
    let range = range_between(doc, caret_boundary(doc, start_caret)?, caret_boundary(doc, end_caret)?);
    Some(SimulatedSelection {
        start_caret,
        end_caret,
        range,
    })
}

/// The inclusive word range a desktop would select for the drag.
pub fn simulate_selection(doc: &Document, g: &DragGesture) -> Option<SelectionRange> {
    let a = caret_word(doc, g.start)?;
    let b = caret_word(doc, g.end)?;
    let boundary = |k: usize, p: Point| {
        if p.x < doc.words()[k].bbox.center_x() {
            k
        } else {
            k + 1
        }
    };
    range_between(doc, boundary(a, g.start), boundary(b, g.end))
}

pub fn snaps_correctly(doc: &Document, g: &DragGesture, gt_range: SelectionRange) -> bool {
    simulate_selection(doc, g) == Some(gt_range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{normalize_reading_order, parse_ocr, OcrRecord};

    /// Two lines of three words each:
    /// line 0: ids 0,1,2 at x [10,40] [50,80] [90,120], y [10,30]
    /// line 1: ids 3,4,5 at the same x, y [40,60]
    fn two_lines() -> Document {
        let mut records = Vec::new();
        for (row, y) in [(0u64, 10.0), (1, 40.0)] {
            for col in 0..3u64 {
                let x = 10.0 + 40.0 * col as f64;
                records.push(OcrRecord {
                    id: row * 3 + col,
                    text: format!("w{}", row * 3 + col),
                    bbox: [x, y, x + 30.0, y + 20.0],
                    confidence: 1.0,
                });
            }
        }
        normalize_reading_order(parse_ocr(records).unwrap())
    }

    fn caret(id: WordId, side: Side) -> Caret {
        Caret { word_id: id, side }
    }

    #[test]
    fn caret_table_for_first_line() {
        let doc = two_lines();
        let table = [
            (Point::new(10.0, 20.0), caret(0, Side::Before)),
            (Point::new(26.0, 20.0), caret(0, Side::After)),
            (Point::new(44.0, 20.0), caret(0, Side::After)),
            (Point::new(46.0, 20.0), caret(1, Side::Before)),
            (Point::new(120.0, 20.0), caret(2, Side::After)),
            (Point::new(140.0, 20.0), caret(2, Side::After)),
            (Point::new(0.0, 20.0), caret(0, Side::Before)),
            (Point::new(60.0, 0.0), caret(1, Side::Before)),
        ];
        for (p, expected) in table {
            assert_eq!(place_caret(&doc, p), Some(expected), "at {p:?}");
        }
    }

    #[test]
    fn above_all_lines_clamps_to_line_zero() {
        let doc = two_lines();
        let c = place_caret(&doc, Point::new(100.0, -500.0)).unwrap();
        assert_eq!(c.word_id, 2);
    }

    #[test]
    fn edge_gesture_selects_span() {
        let doc = two_lines();
        let g = DragGesture::new(Point::new(50.0, 20.0), Point::new(80.0, 50.0));
        assert_eq!(
            simulate_selection(&doc, &g),
            Some(SelectionRange {
                start_word_id: 1,
                end_word_id: 4
            })
        );
        assert_eq!(simulate_selection(&doc, &g.reversed()), simulate_selection(&doc, &g));
    }

    #[test]
    fn empty_selection() {
        let doc = two_lines();
        let g = DragGesture::new(Point::new(12.0, 20.0), Point::new(15.0, 22.0));
        assert_eq!(simulate_selection(&doc, &g), None);
        // After line end and before next line start coincide.
        let g = DragGesture::new(Point::new(130.0, 20.0), Point::new(11.0, 50.0));
        assert_eq!(simulate_selection(&doc, &g), None);
    }

    #[test]
    fn overshoot_snapping() {
        let doc = two_lines();
        let gt = SelectionRange {
            start_word_id: 0,
            end_word_id: 2,
        };
        let exact = DragGesture::new(Point::new(10.0, 20.0), Point::new(120.0, 20.0));
        assert!(snaps_correctly(&doc, &exact, gt));
        let overshoot = DragGesture::new(Point::new(10.0, 20.0), Point::new(150.0, 22.0));
        assert!(snaps_correctly(&doc, &overshoot, gt));
        let left_overshoot = DragGesture::new(Point::new(2.0, 18.0), Point::new(120.0, 20.0));
        assert!(snaps_correctly(&doc, &left_overshoot, gt));
        let next_line = DragGesture::new(Point::new(10.0, 20.0), Point::new(150.0, 50.0));
        assert!(!snaps_correctly(&doc, &next_line, gt));
        assert_eq!(
            simulate_selection(&doc, &next_line),
            Some(SelectionRange {
                start_word_id: 0,
                end_word_id: 5
            })
        );
    }

    #[test]
    fn band_membership_beats_center_distance() {
        // A tall line and a thin line; a point inside the tall line's band
        // but nearer the thin line's center goes to the tall line.
        let doc = normalize_reading_order(
            parse_ocr(vec![
                OcrRecord {
                    id: 0,
                    text: "tall".into(),
                    bbox: [0.0, 0.0, 20.0, 40.0],
                    confidence: 1.0,
                },
                OcrRecord {
                    id: 1,
                    text: "thin".into(),
                    bbox: [0.0, 70.0, 20.0, 72.0],
                    confidence: 1.0,
                },
            ])
            .unwrap(),
        );
        // Tall band reaches y=60, thin band is [69,73]; y=58 is 38 from the
        // tall center and 13 from the thin one.
        assert_eq!(place_caret(&doc, Point::new(25.0, 58.0)).unwrap().word_id, 0);
        assert_eq!(place_caret(&doc, Point::new(25.0, 65.0)).unwrap().word_id, 1);
    }
}
