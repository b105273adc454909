use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::{ChatMessage, Role};
use crate::feedback::FeedbackReport;
use crate::spatial::Bounds2D;

/// Version of the transcript line format.
pub const TRANSCRIPT_VERSION: u32 = 1;

/// Outcome of solving one assistant response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Index of the assistant message this round solved.
    pub response: usize,
    pub solved: bool,
    /// SHA-256 of the solved scene file, hex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_hash: Option<String>,
    pub report: FeedbackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Message(ChatMessage),
    Round(RoundRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    version: u32,
    prompt: String,
    bounds: Bounds2D,
    seed: u64,
    model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_retries: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    enrichment_rounds: Option<usize>,
}

/// Everything said and solved in one session, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTranscript {
    pub prompt: String,
    pub bounds: Bounds2D,
    pub seed: u64,
    pub model: String,
    /// Retry budget the session ran with, when recorded.
    pub max_retries: Option<usize>,
    /// Enrichment rounds the session ran with, when recorded.
    pub enrichment_rounds: Option<usize>,
    pub events: Vec<TranscriptEvent>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot read or write transcript: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {line}: {source}")]
    Format {
        line: usize,
        source: serde_json::Error,
    },
    #[error("transcript has no session header")]
    MissingHeader,
    #[error("unsupported transcript version {0} (expected {TRANSCRIPT_VERSION})")]
    Version(u32),
}

impl SessionTranscript {
    pub fn new(prompt: &str, bounds: Bounds2D, seed: u64, model: &str) -> Self {
        Self {
            prompt: prompt.into(),
            bounds,
            seed,
            model: model.into(),
            max_retries: None,
            enrichment_rounds: None,
            events: Vec::new(),
        }
    }

    pub fn messages(&self) -> impl Iterator<Item = &ChatMessage> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Message(m) => Some(m),
            _ => None,
        })
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.events.iter().filter_map(|e| match e {
            TranscriptEvent::Round(r) => Some(r),
            _ => None,
        })
    }

    /// Assistant replies in order, as received.
    pub fn responses(&self) -> Vec<String> {
        self.messages()
            .filter(|m| m.role == Role::Assistant)
            .map(|m| m.content.clone())
            .collect()
    }

    pub(crate) fn push_message(&mut self, role: Role, content: impl Into<String>) -> usize {
        let index = self.messages().count();
        self.events
            .push(TranscriptEvent::Message(ChatMessage::new(role, content)));
        index
    }

    /// JSON lines: a session header, then one line per event.
    pub fn to_jsonl(&self) -> String {
        let header = Header {
            kind: "session".into(),
            version: TRANSCRIPT_VERSION,
            prompt: self.prompt.clone(),
            bounds: self.bounds,
            seed: self.seed,
            model: self.model.clone(),
            max_retries: self.max_retries,
            enrichment_rounds: self.enrichment_rounds,
        };
        let mut out = serde_json::to_string(&header).expect("headers serialize");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TranscriptError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TranscriptError::MissingHeader)?;
        let header: Header = serde_json::from_str(first)
            .map_err(|source| TranscriptError::Format { line: 1, source })?;
        if header.kind != "session" {
            return Err(TranscriptError::MissingHeader);
        }
        if header.version != TRANSCRIPT_VERSION {
            return Err(TranscriptError::Version(header.version));
        }
        let mut t = Self::new(&header.prompt, header.bounds, header.seed, &header.model);
        t.max_retries = header.max_retries;
        t.enrichment_rounds = header.enrichment_rounds;
        for (n, line) in lines {
            let e = serde_json::from_str(line).map_err(|source| TranscriptError::Format {
                line: n + 1,
                source,
            })?;
            t.events.push(e);
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TranscriptError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranscriptError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}
