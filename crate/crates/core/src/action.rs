//! Action transcripts emitted by grounding models.
//!
//! Grammar: one call per segment, segments separated by newlines or
//! semicolons (outside quotes and parentheses). A call is
//! `verb(arg, arg, ...)` with a case-insensitive verb from
//! `click`, `move_to`, `drag_to`, `drag`, `type`; whitespace between tokens is
//! ignored. Anything that does not fit becomes [`Action::Other`] with the
//! segment text preserved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("empty transcript")]
    EmptyTranscript,
    #[error("drag trigger rate of an empty list is undefined")]
    EmptyBatch,
}

/// How a model's action space expresses a drag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// A single `drag(x1, y1, x2, y2)` call.
    #[default]
    CompleteDrag,
    /// `click`/`move_to` to position, then `drag_to(x, y)`.
    TwoStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Click(Point),
    MoveTo(Point),
    DragTo(Point),
    Drag { start: Point, end: Point },
    Type { text: String },
    Other { raw: String },
}

impl Action {
    fn positioning_point(&self) -> Option<Point> {
        match self {
            Action::Click(p) | Action::MoveTo(p) => Some(*p),
            _ => None,
        }
    }

    /// Whether every coordinate carried by the action is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Action::Click(p) | Action::MoveTo(p) | Action::DragTo(p) => p.is_finite(),
            Action::Drag { start, end } => start.is_finite() && end.is_finite(),
            Action::Type { .. } | Action::Other { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub example_id: String,
    pub dialect: Dialect,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDrag {
    pub start: Point,
    pub end: Point,
}

/// Parses one prediction's action text. Never fails on non-empty input.
pub fn parse_transcript(raw: &str, dialect: Dialect) -> Result<Transcript, ActionError> {
    parse_actions(raw).map(|actions| Transcript {
        example_id: String::new(),
        dialect,
        actions,
    })
}

pub fn parse_actions(raw: &str) -> Result<Vec<Action>, ActionError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ActionError::EmptyTranscript);
    }
    let actions: Vec<Action> = split_calls(trimmed)
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_call)
        .collect();
    if actions.is_empty() {
        // Nothing but separators.
        return Ok(vec![Action::Other {
            raw: trimmed.to_string(),
        }]);
    }
    Ok(actions)
}

fn split_calls(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut begin = 0;
    for (i, c) in s.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' => depth += 1,
            ')' => depth = (depth - 1).max(0),
            ';' | '\n' | '\r' if depth == 0 => {
                out.push(&s[begin..i]);
                begin = i + c.len_utf8();
            }
            // A newline always ends a call, even with unbalanced parentheses.
            '\n' => {
                out.push(&s[begin..i]);
                begin = i + 1;
                depth = 0;
            }
            _ => {}
        }
    }
    out.push(&s[begin..]);
    out
}

fn parse_call(segment: &str) -> Action {
    let other = || Action::Other {
        raw: segment.to_string(),
    };
    let Some(open) = segment.find('(') else {
        return other();
    };
    let Some(inner) = segment[open + 1..].trim_end().strip_suffix(')') else {
        return other();
    };
    let verb: String = segment[..open]
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    match verb.as_str() {
        "click" | "move_to" | "drag_to" => match numbers::<2>(inner) {
            Some([x, y]) => {
                let p = Point::new(x, y);
                match verb.as_str() {
                    "click" => Action::Click(p),
                    "move_to" => Action::MoveTo(p),
                    _ => Action::DragTo(p),
                }
            }
            None => other(),
        },
        "drag" => match numbers::<4>(inner) {
            Some([x1, y1, x2, y2]) => Action::Drag {
                start: Point::new(x1, y1),
                end: Point::new(x2, y2),
            },
            None => other(),
        },
        "type" => Action::Type {
            text: unquote(inner.trim()),
        },
        _ => other(),
    }
}

fn numbers<const N: usize>(inner: &str) -> Option<[f64; N]> {
    let mut out = [0.0; N];
    let mut parts = inner.split(',');
    for slot in &mut out {
        let v: f64 = parts.next()?.trim().parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        *slot = v;
    }
    parts.next().is_none().then_some(out)
}

fn unquote(s: &str) -> String {
    for q in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            let body = &s[1..s.len() - 1];
            let mut out = String::with_capacity(body.len());
            let mut chars = body.chars();
            while let Some(c) = chars.next() {
                if c == '\\' {
                    if let Some(next) = chars.next() {
                        out.push(next);
                    }
                } else {
                    out.push(c);
                }
            }
            return out;
        }
    }
    s.to_string()
}

/// Pulls the scored drag gesture out of a transcript.
///
/// A complete `drag` counts directly. A `drag_to` counts when some `click` or
/// `move_to` precedes it; the start is the last such positioning action.
/// Only the first `drag_to` is considered, and when both forms occur the one
/// that completes earlier in the transcript wins.
pub fn extract_drag(t: &Transcript) -> Option<NormalizedDrag> {
    extract_drag_from(&t.actions)
}

pub fn extract_drag_from(actions: &[Action]) -> Option<NormalizedDrag> {
    let mut cursor: Option<Point> = None;
    let mut seen_drag_to = false;
    for action in actions {
        match action {
            Action::Drag { start, end } => {
                return Some(NormalizedDrag {
                    start: *start,
                    end: *end,
                })
            }
            Action::DragTo(end) if !seen_drag_to => {
                if let Some(start) = cursor {
                    return Some(NormalizedDrag { start, end: *end });
                }
                // An unpositioned first drag_to rules out the two-step form;
                // a later complete drag can still count.
                seen_drag_to = true;
            }
            other => {
                if let Some(p) = other.positioning_point() {
                    cursor = Some(p);
                }
            }
        }
    }
    None
}

/// Fraction of examples with an extracted drag.
pub fn compute_dtr(extractions: &[Option<NormalizedDrag>]) -> Result<f64, ActionError> {
    if extractions.is_empty() {
        return Err(ActionError::EmptyBatch);
    }
    let hits = extractions.iter().filter(|e| e.is_some()).count();
    Ok(hits as f64 / extractions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn actions(raw: &str) -> Vec<Action> {
        parse_transcript(raw, Dialect::TwoStep).unwrap().actions
    }

    #[test]
    fn complete_drag() {
        assert_eq!(
            actions("drag(10,20,30,40)"),
            vec![Action::Drag {
                start: p(10.0, 20.0),
                end: p(30.0, 40.0)
            }]
        );
    }

    #[test]
    fn two_step() {
        assert_eq!(
            actions("click(10,20)\ndrag_to(30,40)"),
            vec![Action::Click(p(10.0, 20.0)), Action::DragTo(p(30.0, 40.0))]
        );
        assert_eq!(
            actions("  MOVE_TO ( 1.5 , 2 ) ;Drag_To(3,4.25)"),
            vec![Action::MoveTo(p(1.5, 2.0)), Action::DragTo(p(3.0, 4.25))]
        );
    }

    #[test]
    fn unknown_and_malformed_calls() {
        assert_eq!(
            actions("scroll(0,-3)"),
            vec![Action::Other {
                raw: "scroll(0,-3)".into()
            }]
        );
        assert_eq!(actions("click(1)"), vec![Action::Other { raw: "click(1)".into() }]);
        assert_eq!(
            actions("drag(1,2,3,nan)"),
            vec![Action::Other {
                raw: "drag(1,2,3,nan)".into()
            }]
        );
        assert_eq!(actions(";;"), vec![Action::Other { raw: ";;".into() }]);
    }

    #[test]
    fn type_string_literals() {
        assert_eq!(
            actions(r#"type("a; b\"c")"#),
            vec![Action::Type { text: "a; b\"c".into() }]
        );
        assert_eq!(actions("type(hello)"), vec![Action::Type { text: "hello".into() }]);
    }

    #[test]
    fn empty_transcript() {
        assert_eq!(
            parse_transcript("  \n ", Dialect::CompleteDrag)
                .unwrap_err()
                .to_string(),
            "empty transcript"
        );
    }

    #[test]
    fn extraction_cases() {
        let drag = extract_drag_from(&[Action::Drag {
            start: p(1.0, 2.0),
            end: p(3.0, 4.0),
        }]);
        assert_eq!(
            drag,
            Some(NormalizedDrag {
                start: p(1.0, 2.0),
                end: p(3.0, 4.0)
            })
        );
        assert_eq!(extract_drag_from(&[Action::DragTo(p(9.0, 9.0))]), None);
        assert_eq!(
            extract_drag_from(&[Action::Click(p(1.0, 1.0)), Action::Type { text: "x".into() }]),
            None
        );
    }

    #[test]
    fn dtr_arithmetic() {
        let s = Some(NormalizedDrag {
            start: p(0.0, 0.0),
            end: p(1.0, 1.0),
        });
        assert_eq!(compute_dtr(&[s, s, None, s]).unwrap(), 0.75);
        assert_eq!(compute_dtr(&[None, None]).unwrap(), 0.0);
        assert_eq!(compute_dtr(&[s; 7]).unwrap(), 1.0);
        assert_eq!(compute_dtr(&[]), Err(ActionError::EmptyBatch));
    }

    #[test]
    fn structured_json_form() {
        let json = r#"[{"action":"click","x":1,"y":2},{"action":"drag_to","x":3,"y":4},
                       {"action":"drag","start":{"x":0,"y":0},"end":{"x":5,"y":5}},
                       {"action":"type","text":"hi"},{"action":"other","raw":"wait()"}]"#;
        let parsed: Vec<Action> = serde_json::from_str(json).unwrap();
        assert_eq!(parsed[0], Action::Click(p(1.0, 2.0)));
        assert_eq!(parsed[4], Action::Other { raw: "wait()".into() });
    }
}
