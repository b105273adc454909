//! Minimal JSON-over-HTTP client shared by the chat and VQA clients.

use std::time::Duration;

use serde_json::Value;

/// POSTs `body` and returns the parsed JSON response. A bearer token is sent
/// when `api_key` is given. Transport failures and non-success statuses are
/// reported as strings.
pub fn post_json(
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    timeout: Duration,
) -> Result<Value, String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| format!("request to {url} failed: {e}"))?;
    let status = resp.status();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| format!("reading response from {url}: {e}"))?;
    if !status.is_success() {
        let snippet: String = text.chars().take(300).collect();
        return Err(format!(
            "{url} returned HTTP {}: {snippet}",
            status.as_u16()
        ));
    }
    serde_json::from_str(&text).map_err(|e| format!("{url} returned invalid JSON: {e}"))
}
