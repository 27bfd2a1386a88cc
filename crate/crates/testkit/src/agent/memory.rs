//! Append-only conversation memory.

use serde::{Deserialize, Serialize};

use crate::llm::Message;
use crate::store::ConversationId;

/// The full message history of one conversation. Messages are only ever
/// appended; export/import lets a test freeze mid-conversation state and
/// resume it elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationMemory {
    conversation_id: String,
    messages: Vec<Message>,
}

impl ConversationMemory {
    pub fn new(conversation_id: &ConversationId) -> Self {
        ConversationMemory { conversation_id: conversation_id.as_str().to_string(), messages: Vec::new() }
    }

    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn append(&mut self, message: Message) {
        self.messages.push(message);
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string(self).expect("memory serializes")
    }

    pub fn import_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
