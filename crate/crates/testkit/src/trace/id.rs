//! Trace and span identifiers plus their generator.
//!
//! Wire format follows the OpenTelemetry convention: trace ids are 16
//! random bytes, span ids 8, both lowercase hex, and the all-zero value
//! is reserved as invalid.

use std::fmt;

use rand::{rngs::StdRng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MalformedSpan;

fn valid_hex_id(s: &str, len: usize) -> bool {
    s.len() == len
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && s.bytes().any(|b| b != b'0')
}

/// 32 lowercase hex characters, never all zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TraceId(String);

impl TraceId {
    pub fn parse(s: &str) -> Result<Self, MalformedSpan> {
        if valid_hex_id(s, 32) {
            Ok(TraceId(s.to_string()))
        } else {
            Err(MalformedSpan::new(
                "trace_id",
                format!("expected 32 lowercase hex chars, not all zero, got {s:?}"),
            ))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TraceId {
    type Error = MalformedSpan;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        TraceId::parse(&s)
    }
}

impl From<TraceId> for String {
    fn from(id: TraceId) -> String {
        id.0
    }
}

impl fmt::Display for TraceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 16 lowercase hex characters, never all zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpanId(String);

impl SpanId {
    pub fn parse(s: &str) -> Result<Self, MalformedSpan> {
        if valid_hex_id(s, 16) {
            Ok(SpanId(s.to_string()))
        } else {
            Err(MalformedSpan::new(
                "span_id",
                format!("expected 16 lowercase hex chars, not all zero, got {s:?}"),
            ))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SpanId {
    type Error = MalformedSpan;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        SpanId::parse(&s)
    }
}

impl From<SpanId> for String {
    fn from(id: SpanId) -> String {
        id.0
    }
}

impl fmt::Display for SpanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

enum Rng {
    // StdRng rather than ThreadRng: the generator sits behind a Mutex that
    // must stay Send so collectors can be shared across threads.
    Os(StdRng),
    Seeded(ChaCha8Rng),
}

/// Id source. The seeded form exists so tests can pin exact id sequences;
/// production use is `IdGen::random()`.
pub struct IdGen {
    rng: Rng,
}

impl IdGen {
    pub fn random() -> Self {
        IdGen { rng: Rng::Os(StdRng::from_os_rng()) }
    }

    /// Deterministic generator: the same seed always yields the same id
    /// sequence, independent of platform.
    pub fn seeded(seed: u64) -> Self {
        IdGen { rng: Rng::Seeded(ChaCha8Rng::seed_from_u64(seed)) }
    }

    fn fill(&mut self, buf: &mut [u8]) {
        // all-zero ids are reserved; regenerate on the (absurdly unlikely) hit
        loop {
            match &mut self.rng {
                Rng::Os(r) => r.fill_bytes(buf),
                Rng::Seeded(r) => r.fill_bytes(buf),
            }
            if buf.iter().any(|b| *b != 0) {
                return;
            }
        }
    }

    pub fn next_trace_id(&mut self) -> TraceId {
        let mut buf = [0u8; 16];
        self.fill(&mut buf);
        TraceId(hex::encode(buf))
    }

    pub fn next_span_id(&mut self) -> SpanId {
        let mut buf = [0u8; 8];
        self.fill(&mut buf);
        SpanId(hex::encode(buf))
    }
}

impl Default for IdGen {
    fn default() -> Self {
        IdGen::random()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_ids_are_valid_and_distinct() {
        let mut gen = IdGen::random();
        let a = gen.next_trace_id();
        let b = gen.next_trace_id();
        assert_ne!(a, b);
        assert!(TraceId::parse(a.as_str()).is_ok());
        let s = gen.next_span_id();
        assert!(SpanId::parse(s.as_str()).is_ok());
    }

    #[test]
    fn seeded_sequence_is_reproducible() {
        let mut a = IdGen::seeded(42);
        let mut b = IdGen::seeded(42);
        for _ in 0..10 {
            assert_eq!(a.next_trace_id(), b.next_trace_id());
            assert_eq!(a.next_span_id(), b.next_span_id());
        }
    }

    #[test]
    fn rejects_malformed_ids() {
        assert!(TraceId::parse("00000000000000000000000000000000").is_err());
        assert!(TraceId::parse("abc").is_err());
        assert!(TraceId::parse("ABCDEF00000000000000000000000001").is_err()); // uppercase
        assert!(SpanId::parse("0000000000000000").is_err());
        assert!(SpanId::parse("12345").is_err());
        assert!(SpanId::parse("123456789abcdef0").is_ok());
    }
}
