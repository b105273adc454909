use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// External visual-question-answering scorer: given a top-down rendering
/// and the scene prompt, returns the probability that the image matches.
pub trait VqaClient: Send + Sync {
    fn yes_probability(&self, svg: &str, prompt: &str) -> Result<f64, String>;
}

/// Outcome recorded in a success report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VqaOutcome {
    Score { value: f64 },
    Unavailable { reason: String },
}

/// Chat-completions endpoint with image input. The rendering is sent as an
/// SVG data URL and a one-token yes/no answer is requested with log
/// probabilities; without log probabilities the answer text decides (1 or 0).
#[derive(Debug, Clone, PartialEq)]
pub struct HttpVqaClient {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

pub fn vqa_question(prompt: &str) -> String {
    format!(
        "Does this top-down view of a table match the description \"{prompt}\"? Answer yes or no."
    )
}

pub fn vqa_request(model: &str, svg: &str, prompt: &str) -> Value {
    let data = base64::engine::general_purpose::STANDARD.encode(svg.as_bytes());
    json!({
        "model": model,
        "max_tokens": 1,
        "temperature": 0,
        "logprobs": true,
        "top_logprobs": 5,
        "messages": [{
            "role": "user",
            "content": [
                {"type": "text", "text": vqa_question(prompt)},
                {"type": "image_url", "image_url": {"url": format!("data:image/svg+xml;base64,{data}")}}
            ]
        }]
    })
}

/// Yes-probability from a chat-completions response, normalized over the
/// yes and no tokens.
pub fn parse_vqa_response(v: &Value) -> Result<f64, String> {
    let choice = v.pointer("/choices/0").ok_or("response has no choices")?;
    let is = |t: &str, w: &str| t.trim().eq_ignore_ascii_case(w);
    if let Some(top) = choice
        .pointer("/logprobs/content/0/top_logprobs")
        .and_then(Value::as_array)
    {
        let (mut yes, mut no) = (0.0, 0.0);
        for t in top {
            let (Some(tok), Some(lp)) = (
                t.get("token").and_then(Value::as_str),
                t.get("logprob").and_then(Value::as_f64),
            ) else {
                continue;
            };
            if is(tok, "yes") {
                yes += lp.exp();
            } else if is(tok, "no") {
                no += lp.exp();
            }
        }
        if yes + no > 0.0 {
            return Ok(yes / (yes + no));
        }
    }
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or("response has no answer text")?;
    let word = text.trim().trim_end_matches(['.', '!']).to_string();
    if is(&word, "yes") {
        Ok(1.0)
    } else if is(&word, "no") {
        Ok(0.0)
    } else {
        Err(format!("unexpected answer `{text}`"))
    }
}

impl VqaClient for HttpVqaClient {
    fn yes_probability(&self, svg: &str, prompt: &str) -> Result<f64, String> {
        let body = vqa_request(&self.model, svg, prompt);
        let resp =
            crate::http::post_json(&self.endpoint, self.api_key.as_deref(), &body, self.timeout)?;
        parse_vqa_response(&resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logprobs_are_normalized() {
        let v = json!({"choices": [{"message": {"content": "Yes"}, "logprobs": {"content": [{"top_logprobs": [
            {"token": "Yes", "logprob": (0.6f64).ln()},
            {"token": "No", "logprob": (0.2f64).ln()},
            {"token": "Maybe", "logprob": (0.2f64).ln()}
        ]}]}}]});
        assert!((parse_vqa_response(&v).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn text_answer_fallback() {
        assert_eq!(
            parse_vqa_response(&json!({"choices": [{"message": {"content": "no."}}]})).unwrap(),
            0.0
        );
        assert!(
            parse_vqa_response(&json!({"choices": [{"message": {"content": "purple"}}]})).is_err()
        );
        assert!(parse_vqa_response(&json!({})).is_err());
    }
}
