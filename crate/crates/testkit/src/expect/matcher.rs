//! Deep subset matching over JSON values.
//!
//! The comparison rules:
//! - objects: every expected key must be present and match; in `Subset`
//!   mode the actual value may carry extra keys, in `Exact` mode it may not
//! - arrays: lengths must be equal in both modes, elements match pairwise
//! - numbers: compared numerically, so `1` matches `1.0`; two
//!   integer-classed numbers compare exactly, everything else as f64
//! - strings, booleans: equality; `null` matches only `null`
//!
//! On failure the *first* mismatch in depth-first, sorted-key order is
//! reported with a jq-style path.

use std::fmt;

use serde_json::Value;

use crate::trace::canonical_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Expected is a structural subset of actual.
    Subset,
    /// Expected and actual must coincide exactly (same object keys).
    Exact,
}

/// Where and how a comparison failed. `path` is jq-style (`$`, `$.a[2].b`);
/// `depth` counts path segments so callers can rank near-misses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub path: String,
    pub expected: String,
    pub actual: String,
    pub reason: String,
    pub depth: usize,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "at {}: {}: expected {}, actual {}",
            self.path, self.reason, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone)]
enum Segment {
    Key(String),
    Index(usize),
}

fn render_path(segments: &[Segment]) -> String {
    let mut out = String::from("$");
    for segment in segments {
        match segment {
            Segment::Key(k) => {
                out.push('.');
                out.push_str(k);
            }
            Segment::Index(i) => {
                out.push_str(&format!("[{i}]"));
            }
        }
    }
    out
}

fn mismatch(segments: &[Segment], expected: &str, actual: &str, reason: &str) -> Mismatch {
    Mismatch {
        path: render_path(segments),
        expected: expected.to_string(),
        actual: actual.to_string(),
        reason: reason.to_string(),
        depth: segments.len(),
    }
}

/// `true` when `expected` is a deep structural subset of `actual`.
pub fn deep_subset_match(expected: &Value, actual: &Value) -> bool {
    match_value(expected, actual, MatchMode::Subset).is_ok()
}

/// Full comparison; returns the first mismatch in depth-first order.
pub fn match_value(expected: &Value, actual: &Value, mode: MatchMode) -> Result<(), Mismatch> {
    let mut segments = Vec::new();
    match_at(expected, actual, mode, &mut segments)
}

fn match_at(
    expected: &Value,
    actual: &Value,
    mode: MatchMode,
    segments: &mut Vec<Segment>,
) -> Result<(), Mismatch> {
    match (expected, actual) {
        (Value::Object(exp), Value::Object(act)) => {
            for (key, exp_value) in exp {
                match act.get(key) {
                    Some(act_value) => {
                        segments.push(Segment::Key(key.clone()));
                        match_at(exp_value, act_value, mode, segments)?;
                        segments.pop();
                    }
                    None => {
                        segments.push(Segment::Key(key.clone()));
                        let m = mismatch(
                            segments,
                            &canonical_json(exp_value),
                            "<absent>",
                            "key missing from actual",
                        );
                        segments.pop();
                        return Err(m);
                    }
                }
            }
            if mode == MatchMode::Exact {
                for key in act.keys() {
                    if !exp.contains_key(key) {
                        segments.push(Segment::Key(key.clone()));
                        let m = mismatch(
                            segments,
                            "<absent>",
                            &canonical_json(&act[key]),
                            "key not expected",
                        );
                        segments.pop();
                        return Err(m);
                    }
                }
            }
            Ok(())
        }
        (Value::Array(exp), Value::Array(act)) => {
            if exp.len() != act.len() {
                return Err(mismatch(
                    segments,
                    &canonical_json(expected),
                    &canonical_json(actual),
                    &format!("array length {} differs from expected {}", act.len(), exp.len()),
                ));
            }
            for (i, (exp_value, act_value)) in exp.iter().zip(act).enumerate() {
                segments.push(Segment::Index(i));
                match_at(exp_value, act_value, mode, segments)?;
                segments.pop();
            }
            Ok(())
        }
        (Value::Number(exp), Value::Number(act)) => {
            if numbers_equal(exp, act) {
                Ok(())
            } else {
                Err(mismatch(
                    segments,
                    &canonical_json(expected),
                    &canonical_json(actual),
                    "numbers differ",
                ))
            }
        }
        (Value::Null, Value::Null) => Ok(()),
        (Value::Bool(a), Value::Bool(b)) if a == b => Ok(()),
        (Value::String(a), Value::String(b)) if a == b => Ok(()),
        _ => Err(mismatch(
            segments,
            &canonical_json(expected),
            &canonical_json(actual),
            "values differ",
        )),
    }
}

/// Integer-classed numbers compare exactly in i128 space; any float on
/// either side falls back to f64 comparison (so `1` equals `1.0`).
fn numbers_equal(a: &serde_json::Number, b: &serde_json::Number) -> bool {
    fn int_of(n: &serde_json::Number) -> Option<i128> {
        n.as_i64().map(i128::from).or_else(|| n.as_u64().map(i128::from))
    }
    match (int_of(a), int_of(b)) {
        (Some(x), Some(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}
