use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// A chat-completion provider.
pub trait ChatClient {
    /// Returns the assistant reply to `messages`, or a description of the
    /// transport or provider failure.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, String>;

    /// Completions requested so far.
    fn calls(&self) -> usize;
}

/// Chat-completions over HTTP: POSTs `{model, temperature, messages}` and
/// reads `choices[0].message.content`.
#[derive(Debug)]
pub struct HttpChatClient {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout: Duration,
    calls: AtomicUsize,
}

impl HttpChatClient {
    /// `endpoint` is either the full completions URL or a base URL, to
    /// which `/chat/completions` is appended.
    pub fn new(
        endpoint: &str,
        model: &str,
        api_key: Option<String>,
        temperature: f64,
        timeout: Duration,
    ) -> Self {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        Self {
            url,
            model: model.into(),
            api_key,
            temperature,
            timeout,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({"model": self.model, "temperature": self.temperature, "messages": messages})
    }
}

pub fn parse_completion(v: &Value) -> Result<String, String> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(String::from)
        .ok_or_else(|| "completion response has no choices[0].message.content".to_string())
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let resp = crate::http::post_json(
            &self.url,
            self.api_key.as_deref(),
            &self.request_body(messages),
            self.timeout,
        )?;
        parse_completion(&resp)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Replies with canned responses in order; used for offline runs, replays
/// and tests. Running out of responses is reported as an endpoint failure.
#[derive(Debug)]
pub struct ScriptedClient {
    responses: Vec<String>,
    next: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            responses: responses.into_iter().map(Into::into).collect(),
            next: AtomicUsize::new(0),
        }
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, String> {
        let i = self.next.fetch_add(1, Ordering::Relaxed);
        self.responses.get(i).cloned().ok_or_else(|| {
            format!(
                "scripted endpoint has no response {} (only {} scripted)",
                i + 1,
                self.responses.len()
            )
        })
    }

    fn calls(&self) -> usize {
        self.next.load(Ordering::Relaxed)
    }
}

/// The program text inside an assistant reply: code fences and any prose
/// around the outermost brackets are dropped, then missing commas between
/// adjacent entries and trailing commas are repaired.
pub fn extract_program(response: &str) -> String {
    let body = match (response.find('['), response.rfind(']')) {
        (Some(a), Some(b)) if a < b => &response[a..=b],
        _ => response.trim(),
    };
    repair_commas(body)
}

fn repair_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let next_significant = |from: usize| chars[from..].iter().copied().find(|c| !c.is_whitespace());
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' if matches!(next_significant(i + 1), Some(']' | '}')) => {}
            ']' | '}' => {
                out.push(c);
                if next_significant(i + 1) == Some('[') {
                    out.push(',');
                }
            }
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_style_entries_get_commas() {
        let raw = "Here you go:\n```json\n[\n  [\"a_0\", \"x\"]\n  [\"a_0\", \"FACING-FRONT\", \"root\", {}],\n]\n```";
        let fixed = extract_program(raw);
        let v: Value = serde_json::from_str(&fixed).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
    }

    #[test]
    fn strings_are_left_alone() {
        let raw = r#"[["a_0", "a ] [ weird, ] description"]]"#;
        assert_eq!(extract_program(raw), raw);
    }

    #[test]
    fn base_urls_get_the_completions_path() {
        let c = HttpChatClient::new(
            "http://localhost:8000/v1/",
            "m",
            None,
            0.0,
            Duration::from_secs(1),
        );
        assert_eq!(c.url, "http://localhost:8000/v1/chat/completions");
        let c = HttpChatClient::new(
            "http://h/v1/chat/completions",
            "m",
            None,
            0.0,
            Duration::from_secs(1),
        );
        assert_eq!(c.url, "http://h/v1/chat/completions");
    }

    #[test]
    fn scripted_client_runs_out() {
        let c = ScriptedClient::new(["one"]);
        assert_eq!(c.complete(&[]).unwrap(), "one");
        assert!(c.complete(&[]).is_err());
        assert_eq!(c.calls(), 2);
    }
}
