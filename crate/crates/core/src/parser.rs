//! Parsing and validation of Think-before-Grounding responses.
//!
//! A response must be exactly one `<think>...</think>` segment followed by
//! one `<answer>...</answer>` segment, with nothing but whitespace around
//! or between them. The answer is a JSON object or array of objects, each
//! carrying exactly `img_idx`, `label`, and `bbox_2d`.
//!
//! Parsing is total: every input yields either a validated prediction set
//! or a non-empty list of stable [`ViolationCode`]s. Codes are reported
//! once each, in first-detection order, and any violation invalidates the
//! whole response.

use crate::geometry::{check_box, BoxViolation};
use crate::sample::TargetTuple;
use serde::{Deserialize, Serialize};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";

/// Stable diagnosis codes for malformed responses (external contract).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    /// The `<think>` pair is absent, repeated, inverted, or not first.
    MissingThinkTags,
    /// The `<answer>` pair is absent, repeated, or inverted.
    MissingAnswerTags,
    /// Non-whitespace content before, between, or after the segments.
    TrailingContent,
    /// The answer segment is not a JSON object or array of objects.
    UnparseableAnswer,
    /// A target object lacks a required field.
    MissingField,
    /// A field has the wrong type or shape, or an extra field is present.
    MalformedField,
    /// A box with `x2 <= x1` or `y2 <= y1`.
    DegenerateBox,
    /// A coordinate outside `[0, 1000)`.
    OutOfRangeCoordinate,
    /// A negative image index.
    NegativeIndex,
}

/// All codes, in reporting order.
pub const VIOLATION_CODES: [ViolationCode; 9] = [
    ViolationCode::MissingThinkTags,
    ViolationCode::MissingAnswerTags,
    ViolationCode::TrailingContent,
    ViolationCode::UnparseableAnswer,
    ViolationCode::MissingField,
    ViolationCode::MalformedField,
    ViolationCode::DegenerateBox,
    ViolationCode::OutOfRangeCoordinate,
    ViolationCode::NegativeIndex,
];

/// A target object as parsed, before value-level validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTarget {
    pub img_idx: i64,
    pub label: String,
    pub bbox: [f64; 4],
}

/// Outcome of parsing a full response.
///
/// `predictions` is present iff `violations` is empty; `candidates` is
/// present whenever the answer segment itself parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub think: Option<String>,
    pub candidates: Option<Vec<CandidateTarget>>,
    pub predictions: Option<Vec<TargetTuple>>,
    pub violations: Vec<ViolationCode>,
}

impl ParsedResponse {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn occurrences(text: &str, pat: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(pat) {
        out.push(from + pos);
        from += pos + pat.len();
    }
    out
}

fn push_once(codes: &mut Vec<ViolationCode>, code: ViolationCode) {
    if !codes.contains(&code) {
        codes.push(code);
    }
}

/// Splits a response into its think and answer segments.
///
/// Tag-count and ordering problems are reported before content checks; a
/// response whose tags cannot be located reliably never reaches the
/// stray-content check.
pub fn split_response(text: &str) -> Result<(String, String), Vec<ViolationCode>> {
    let to = occurrences(text, THINK_OPEN);
    let tc = occurrences(text, THINK_CLOSE);
    let ao = occurrences(text, ANSWER_OPEN);
    let ac = occurrences(text, ANSWER_CLOSE);

    let mut codes = Vec::new();
    if to.len() != 1 || tc.len() != 1 {
        push_once(&mut codes, ViolationCode::MissingThinkTags);
    }
    if ao.len() != 1 || ac.len() != 1 {
        push_once(&mut codes, ViolationCode::MissingAnswerTags);
    }
    if !codes.is_empty() {
        return Err(codes);
    }

    let (to, tc, ao, ac) = (to[0], tc[0], ao[0], ac[0]);
    if tc < to {
        push_once(&mut codes, ViolationCode::MissingThinkTags);
    }
    if ac < ao {
        push_once(&mut codes, ViolationCode::MissingAnswerTags);
    }
    if codes.is_empty() && !(to < tc && tc < ao && ao < ac) {
        // Pairs are internally ordered but the think segment is not a
        // clean prefix (answer-first or interleaved tags).
        push_once(&mut codes, ViolationCode::MissingThinkTags);
    }
    if !codes.is_empty() {
        return Err(codes);
    }

    let prefix = &text[..to];
    let between = &text[tc + THINK_CLOSE.len()..ao];
    let suffix = &text[ac + ANSWER_CLOSE.len()..];
    if [prefix, between, suffix]
        .iter()
        .any(|s| !s.trim().is_empty())
    {
        return Err(vec![ViolationCode::TrailingContent]);
    }

    let think = text[to + THINK_OPEN.len()..tc].to_string();
    let answer = text[ao + ANSWER_OPEN.len()..ac].to_string();
    Ok((think, answer))
}

fn candidate_from_object(
    obj: &serde_json::Map<String, serde_json::Value>,
    codes: &mut Vec<ViolationCode>,
) -> Option<CandidateTarget> {
    use serde_json::Value;

    const REQUIRED: [&str; 3] = ["img_idx", "label", "bbox_2d"];
    let mut broken = false;
    for field in REQUIRED {
        if !obj.contains_key(field) {
            push_once(codes, ViolationCode::MissingField);
            broken = true;
        }
    }
    if obj.keys().any(|k| !REQUIRED.contains(&k.as_str())) {
        push_once(codes, ViolationCode::MalformedField);
        broken = true;
    }

    let img_idx = match obj.get("img_idx") {
        Some(Value::Number(n)) if n.as_i64().is_some() => n.as_i64().unwrap(),
        Some(_) => {
            push_once(codes, ViolationCode::MalformedField);
            broken = true;
            0
        }
        None => 0,
    };
    let label = match obj.get("label") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            push_once(codes, ViolationCode::MalformedField);
            broken = true;
            String::new()
        }
        None => String::new(),
    };
    let bbox = match obj.get("bbox_2d") {
        Some(Value::Array(items)) if items.len() == 4 => {
            let mut out = [0.0f64; 4];
            let mut numeric = true;
            for (i, item) in items.iter().enumerate() {
                match item.as_f64() {
                    Some(v) => out[i] = v,
                    None => numeric = false,
                }
            }
            if numeric {
                out
            } else {
                push_once(codes, ViolationCode::MalformedField);
                broken = true;
                [0.0; 4]
            }
        }
        Some(_) => {
            push_once(codes, ViolationCode::MalformedField);
            broken = true;
            [0.0; 4]
        }
        None => [0.0; 4],
    };

    if broken {
        None
    } else {
        Some(CandidateTarget {
            img_idx,
            label,
            bbox,
        })
    }
}

/// Parses the answer segment into candidate targets.
///
/// Accepts a single object or an array of objects. Type- and shape-level
/// problems are aggregated across all entries.
pub fn parse_answer(answer: &str) -> Result<Vec<CandidateTarget>, Vec<ViolationCode>> {
    use serde_json::Value;

    let value: Value = match serde_json::from_str(answer) {
        Ok(v) => v,
        Err(_) => return Err(vec![ViolationCode::UnparseableAnswer]),
    };
    let objects: Vec<&serde_json::Map<String, Value>> = match &value {
        Value::Object(m) => vec![m],
        Value::Array(items) => {
            let mut objs = Vec::with_capacity(items.len());
            let mut codes = Vec::new();
            for item in items {
                match item {
                    Value::Object(m) => objs.push(m),
                    _ => push_once(&mut codes, ViolationCode::MalformedField),
                }
            }
            if !codes.is_empty() {
                return Err(codes);
            }
            objs
        }
        _ => return Err(vec![ViolationCode::UnparseableAnswer]),
    };

    let mut codes = Vec::new();
    let mut candidates = Vec::with_capacity(objects.len());
    for obj in objects {
        if let Some(c) = candidate_from_object(obj, &mut codes) {
            candidates.push(c);
        }
    }
    if codes.is_empty() {
        Ok(candidates)
    } else {
        Err(codes)
    }
}

/// Value-level validation of parsed candidates.
///
/// Indices must be non-negative and boxes must pass [`check_box`]; a
/// single violation invalidates the whole set.
pub fn check_structural_validity(
    candidates: &[CandidateTarget],
) -> Result<Vec<TargetTuple>, Vec<ViolationCode>> {
    let mut codes = Vec::new();
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.img_idx < 0 {
            push_once(&mut codes, ViolationCode::NegativeIndex);
        }
        match check_box(c.bbox) {
            Ok(bbox_2d) => {
                if c.img_idx >= 0 {
                    out.push(TargetTuple {
                        img_idx: c.img_idx as usize,
                        label: c.label.clone(),
                        bbox_2d,
                    });
                }
            }
            Err(violations) => {
                for v in violations {
                    push_once(
                        &mut codes,
                        match v {
                            BoxViolation::NonIntegral => ViolationCode::MalformedField,
                            BoxViolation::OutOfRange => ViolationCode::OutOfRangeCoordinate,
                            BoxViolation::EmptyExtent => ViolationCode::DegenerateBox,
                        },
                    );
                }
            }
        }
    }
    if codes.is_empty() {
        Ok(out)
    } else {
        Err(codes)
    }
}

/// Full parse pipeline; never panics, never errors.
pub fn parse_response(text: &str) -> ParsedResponse {
    let (think, answer) = match split_response(text) {
        Ok(parts) => parts,
        Err(violations) => {
            return ParsedResponse {
                think: None,
                candidates: None,
                predictions: None,
                violations,
            }
        }
    };
    let candidates = match parse_answer(&answer) {
        Ok(c) => c,
        Err(violations) => {
            return ParsedResponse {
                think: Some(think),
                candidates: None,
                predictions: None,
                violations,
            }
        }
    };
    match check_structural_validity(&candidates) {
        Ok(predictions) => ParsedResponse {
            think: Some(think),
            candidates: Some(candidates),
            predictions: Some(predictions),
            violations: Vec::new(),
        },
        Err(violations) => ParsedResponse {
            think: Some(think),
            candidates: Some(candidates),
            predictions: None,
            violations,
        },
    }
}

/// Serializes a prediction set in the documented answer schema (always an
/// array). Re-parsing the result yields an identical set.
pub fn render_answer(predictions: &[TargetTuple]) -> String {
    serde_json::to_string(predictions).expect("prediction sets serialize")
}
