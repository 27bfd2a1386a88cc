//! Shared helpers for the integration and acceptance suites.
//!
//! The subset-matcher oracle in here is written independently of the
//! library's matcher on purpose: the acceptance suite checks the two
//! against each other over enumerated and randomized JSON pairs. Keep
//! this implementation naive and obviously correct; do not "fix" it by
//! copying logic from the library side.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

// ---- reference subset matcher ----

/// Brute-force reference for subset matching.
///
/// Rules, stated flat so they can be eyeballed:
/// - objects: every expected key must exist in actual and match recursively;
///   actual may carry extra keys
/// - arrays: same length, element i matches element i
/// - numbers: compared by numeric value (1 == 1.0)
/// - null matches only null; everything else by equality
/// - any container/scalar kind mismatch fails
pub fn oracle_subset(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => e
            .iter()
            .all(|(k, ev)| a.get(k).is_some_and(|av| oracle_subset(ev, av))),
        (Value::Array(e), Value::Array(a)) => {
            e.len() == a.len() && e.iter().zip(a.iter()).all(|(ev, av)| oracle_subset(ev, av))
        }
        (Value::Number(e), Value::Number(a)) => match (e.as_f64(), a.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => e == a,
        },
        (e, a) => e == a,
    }
}

/// Brute-force reference for exact matching: like subset, but objects may
/// not carry extra keys on the actual side.
pub fn oracle_exact(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => {
            e.len() == a.len()
                && e.iter()
                    .all(|(k, ev)| a.get(k).is_some_and(|av| oracle_exact(ev, av)))
        }
        (Value::Array(e), Value::Array(a)) => {
            e.len() == a.len() && e.iter().zip(a.iter()).all(|(ev, av)| oracle_exact(ev, av))
        }
        (Value::Number(e), Value::Number(a)) => match (e.as_f64(), a.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => e == a,
        },
        (e, a) => e == a,
    }
}

// ---- exhaustive enumeration ----

/// Every JSON value of depth <= 1 drawn from the given scalar pool.
/// Depth counts a scalar as 1, a composite as 1 + max child depth.
fn scalar_level(pool: &[Value]) -> Vec<Value> {
    pool.to_vec()
}

/// All composites of width <= `width` whose children come from `children`:
/// arrays of length 0..=width and objects over the first `width` keys of
/// a fixed alphabet. Dedup happens in `enumerate_values`.
fn composites(children: &[Value], width: usize) -> Vec<Value> {
    const KEYS: [&str; 4] = ["a", "b", "c", "d"];
    let mut out = Vec::new();

    // arrays: all tuples of length 0..=width
    for len in 0..=width {
        let mut stack: Vec<Vec<Value>> = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::new();
            for prefix in &stack {
                for child in children {
                    let mut v = prefix.clone();
                    v.push(child.clone());
                    next.push(v);
                }
            }
            stack = next;
        }
        for items in stack {
            out.push(Value::Array(items));
        }
    }

    // objects: every subset of the key alphabet of size <= width, with every
    // assignment of children to the chosen keys
    let keys = &KEYS[..width.min(KEYS.len())];
    let subsets = 1u32 << keys.len();
    for mask in 0..subsets {
        let chosen: Vec<&str> = keys
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, k)| *k)
            .collect();
        let mut stack: Vec<Map<String, Value>> = vec![Map::new()];
        for key in chosen {
            let mut next = Vec::new();
            for prefix in &stack {
                for child in children {
                    let mut m = prefix.clone();
                    m.insert(key.to_string(), child.clone());
                    next.push(m);
                }
            }
            stack = next;
        }
        for m in stack {
            out.push(Value::Object(m));
        }
    }
    out
}

/// Exhaustively enumerate all JSON values up to the given depth and width
/// over a scalar pool. The pool size dictates how fast this blows up, so
/// callers pick pools to keep the pair product tractable.
pub fn enumerate_values(pool: &[Value], depth: usize, width: usize) -> Vec<Value> {
    let mut level = scalar_level(pool);
    let mut all = level.clone();
    for _ in 1..depth {
        level = {
            let mut next = composites(&all, width);
            next.retain(|v| !all.contains(v));
            next
        };
        all.extend(level.iter().cloned());
    }
    all
}

// ---- randomized pair generation ----

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random JSON value. Numeric leaves stay within exact f64 range so the
/// oracle's as_f64 comparison cannot diverge from the library on precision.
pub fn random_value(rng: &mut ChaCha8Rng, depth: usize, width: usize) -> Value {
    let pick = if depth == 0 { rng.random_range(0..6) } else { rng.random_range(0..8) };
    match pick {
        0 => Value::Null,
        1 => json!(rng.random_bool(0.5)),
        2 => json!(rng.random_range(-5i64..5)),
        3 => json!(rng.random_range(-5i64..5) as f64 + 0.5),
        4 => json!(rng.random_range(0i64..3) as f64), // integral float, e.g. 2.0
        5 => {
            let letters = ["x", "y", "z", "münchen", ""];
            json!(letters[rng.random_range(0..letters.len())])
        }
        6 => {
            let len = rng.random_range(0..=width);
            Value::Array((0..len).map(|_| random_value(rng, depth - 1, width)).collect())
        }
        _ => {
            let keys = ["a", "b", "c", "d", "phoneNr"];
            let len = rng.random_range(0..=width);
            let mut m = Map::new();
            for _ in 0..len {
                m.insert(
                    keys[rng.random_range(0..keys.len())].to_string(),
                    random_value(rng, depth - 1, width),
                );
            }
            Value::Object(m)
        }
    }
}

/// Derive an expected value that plausibly subset-matches `actual`: drop
/// object keys at random, keep array lengths, occasionally perturb a leaf
/// so mismatches show up too.
pub fn project_subset(rng: &mut ChaCha8Rng, actual: &Value) -> Value {
    match actual {
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, v) in m {
                if rng.random_bool(0.7) {
                    out.insert(k.clone(), project_subset(rng, v));
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => {
            Value::Array(items.iter().map(|v| project_subset(rng, v)).collect())
        }
        leaf => {
            if rng.random_bool(0.1) {
                json!("perturbed")
            } else {
                leaf.clone()
            }
        }
    }
}
