//! Record/replay client: deterministic "real" responses.
//!
//! Recording runs wrap a live client and append one `{digest, response}`
//! JSON line per invocation. Replay runs read those lines back in order,
//! verifying that the incoming request still digests to the recorded
//! value, so a drifted prompt or tool inventory fails loudly instead of
//! silently replaying stale answers.
//!
//! The digest hashes the semantic content of the message sequence: roles,
//! text blocks, tool names and tool inputs, tool results. It deliberately
//! excludes tool_use ids (generated) and anything time-like, so recordings
//! are stable across runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::trace::canonical_json;

use super::{ClientReply, ContentBlock, LlmClient, LlmError, LlmRequest, LlmResponse};

/// Stable hex digest of a request's semantic content.
pub fn request_digest(request: &LlmRequest) -> String {
    let mut hasher = Sha256::new();
    for message in &request.messages {
        hasher.update(b"role:");
        hasher.update(match message.role {
            super::Role::User => b"user".as_slice(),
            super::Role::Assistant => b"assistant".as_slice(),
            super::Role::ToolResult => b"tool_result".as_slice(),
        });
        hasher.update(b"\n");
        for block in &message.content {
            match block {
                ContentBlock::Text { text } => {
                    hasher.update(b"text:");
                    hasher.update(text.as_bytes());
                }
                ContentBlock::ToolUse { name, input, .. } => {
                    hasher.update(b"tool_use:");
                    hasher.update(name.as_bytes());
                    hasher.update(b":");
                    hasher.update(canonical_json(input).as_bytes());
                }
                ContentBlock::ToolResult { output, is_error, .. } => {
                    hasher.update(b"tool_result:");
                    hasher.update(canonical_json(output).as_bytes());
                    hasher.update(if *is_error { b":err".as_slice() } else { b":ok" });
                }
            }
            hasher.update(b"\n");
        }
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordingEntry {
    digest: String,
    response: LlmResponse,
}

enum Mode {
    Record { inner: Box<dyn LlmClient>, file: fs::File },
    Replay { entries: Vec<RecordingEntry>, cursor: usize },
}

/// See the module docs. Construct with [`RecordReplayClient::record`] or
/// [`RecordReplayClient::replay`].
pub struct RecordReplayClient {
    path: PathBuf,
    mode: Mode,
}

impl RecordReplayClient {
    /// Wraps `inner`, truncating `path` and recording every invocation.
    pub fn record(path: impl AsRef<Path>, inner: Box<dyn LlmClient>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let file = fs::File::create(&path)?;
        Ok(RecordReplayClient { path, mode: Mode::Record { inner, file } })
    }

    /// Serves responses from an existing recording, in order.
    pub fn replay(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let text = fs::read_to_string(&path)?;
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: RecordingEntry = serde_json::from_str(line).map_err(|e| {
                LlmError::InvalidScript(format!(
                    "recording {}: line {}: {}",
                    path.display(),
                    idx + 1,
                    e
                ))
            })?;
            entry.response.validate()?;
            entries.push(entry);
        }
        Ok(RecordReplayClient { path, mode: Mode::Replay { entries, cursor: 0 } })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of entries served so far (replay) or written (record).
    pub fn position(&self) -> usize {
        match &self.mode {
            Mode::Record { .. } => 0,
            Mode::Replay { cursor, .. } => *cursor,
        }
    }
}

impl LlmClient for RecordReplayClient {
    fn invoke(&mut self, request: &LlmRequest) -> Result<ClientReply, LlmError> {
        let digest = request_digest(request);
        match &mut self.mode {
            Mode::Record { inner, file } => {
                let reply = inner.invoke(request)?;
                let entry = RecordingEntry { digest, response: reply.response.clone() };
                writeln!(file, "{}", serde_json::to_string(&entry)?)?;
                file.flush()?;
                Ok(ClientReply { response: reply.response, mocked: false })
            }
            Mode::Replay { entries, cursor } => {
                let index = *cursor;
                let entry = entries
                    .get(index)
                    .ok_or(LlmError::ReplayExhausted { consumed: index })?;
                if entry.digest != digest {
                    return Err(LlmError::ReplayMismatch {
                        index,
                        recorded: entry.digest.clone(),
                        incoming: digest,
                    });
                }
                *cursor += 1;
                Ok(ClientReply { response: entry.response.clone(), mocked: false })
            }
        }
    }
}
