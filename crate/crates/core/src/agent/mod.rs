//! The generate, solve, feedback, refine loop against a chat-completion
//! endpoint.
//!
//! Every request is rebuilt from the fixed system prompt, the table and
//! scene prompt, and at most the latest reply with its feedback. Replies,
//! feedback and solve outcomes are logged to a [`SessionTranscript`], which
//! is enough to replay a session offline.

mod client;
mod transcript;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::feedback::{success_report, SuccessOptions, VqaClient};
use crate::physics::SimulationBackend;
use crate::pipeline::{solve_text, SolveConfig, Solved};
use crate::scene::{program_hash, Provenance, SceneFile, SceneState};
use crate::spatial::Bounds2D;
use crate::stability::StabilityError;

pub use client::{
    extract_program, parse_completion, ChatClient, ChatMessage, HttpChatClient, Role,
    ScriptedClient,
};
pub use transcript::{
    RoundRecord, SessionTranscript, TranscriptError, TranscriptEvent, TRANSCRIPT_VERSION,
};

/// Fixed system prompt describing the predicate language.
pub const SYSTEM_PROMPT: &str = include_str!("../../resources/system_prompt.txt");
const USER_TEMPLATE: &str = include_str!("../../resources/user_prompt.txt");
const FEEDBACK_TEMPLATE: &str = include_str!("../../resources/feedback_prompt.txt");
const ENRICH_TEMPLATE: &str = "The scene was built successfully. Here's the feedback {feedback}. Please add more objects to enrich the scene while keeping the existing relationships, and return the complete list. You should still strictly follow the output format.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    /// Failed attempts allowed after the first one, per phase.
    pub max_retries: usize,
    pub temperature: f64,
    pub timeout_secs: f64,
    /// Solve a program file instead of calling an endpoint.
    pub offline: bool,
    /// Rounds of "add more objects" requests after the first success.
    pub enrichment_rounds: usize,
    /// Perturbation samples per object for the success report.
    pub stability_samples: usize,
    pub solve: SolveConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "o4-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 5,
            temperature: 1.0,
            timeout_secs: 120.0,
            offline: false,
            enrichment_rounds: 1,
            stability_samples: crate::stability::PerturbationSpec::DEFAULT_SAMPLES,
            solve: SolveConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.0))
    }

    /// HTTP client for this configuration, reading the key from the
    /// configured variable. A missing key is an error unless the endpoint
    /// needs none (`allow_missing_key`).
    pub fn http_client(&self, allow_missing_key: bool) -> Result<HttpChatClient, AgentError> {
        let key = std::env::var(&self.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        if key.is_none() && !allow_missing_key {
            return Err(AgentError::MissingApiKey(self.api_key_env.clone()));
        }
        Ok(HttpChatClient::new(
            &self.endpoint,
            &self.model,
            key,
            self.temperature,
            self.timeout(),
        ))
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("the scene prompt is empty")]
    EmptyPrompt,
    #[error("environment variable `{0}` with the API key is not set")]
    MissingApiKey(String),
    #[error("endpoint failed: {message}")]
    Endpoint {
        message: String,
        transcript: Box<SessionTranscript>,
    },
    #[error("no valid scene after {attempts} attempts")]
    ExhaustedRetries {
        attempts: usize,
        /// Largest partial scene seen.
        best_scene: Option<Box<SceneState>>,
        transcript: Box<SessionTranscript>,
    },
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

/// Table extent as shown to the agent.
pub fn table_bbox(bounds: &Bounds2D) -> String {
    format!(
        "x: [{}, {}], y: [{}, {}]",
        bounds.min_x, bounds.max_x, bounds.min_y, bounds.max_y
    )
}

pub fn user_message(prompt: &str, bounds: &Bounds2D) -> String {
    USER_TEMPLATE
        .replace("{table_bbox}", &table_bbox(bounds))
        .replace("{scene_prompt}", prompt)
}

pub fn feedback_message(feedback: &str) -> String {
    FEEDBACK_TEMPLATE.replace("{feedback}", feedback)
}

pub fn enrichment_message(feedback: &str) -> String {
    ENRICH_TEMPLATE.replace("{feedback}", feedback)
}

/// Messages for the next request: system and user, then the previous reply
/// and the feedback on it when there is one.
pub fn build_context(
    prompt: &str,
    bounds: &Bounds2D,
    previous: Option<(&str, &str)>,
) -> Result<Vec<ChatMessage>, AgentError> {
    if prompt.trim().is_empty() {
        return Err(AgentError::EmptyPrompt);
    }
    let mut messages = vec![
        ChatMessage::new(Role::System, SYSTEM_PROMPT),
        ChatMessage::new(Role::User, user_message(prompt, bounds)),
    ];
    if let Some((response, feedback)) = previous {
        messages.push(ChatMessage::new(Role::Assistant, response));
        messages.push(ChatMessage::new(Role::User, feedback));
    }
    Ok(messages)
}

/// What a session needs besides the prompt and configuration.
#[derive(Clone, Copy)]
pub struct SessionEnv<'a> {
    pub catalog: &'a Catalog,
    pub bounds: Bounds2D,
    pub backend: &'a dyn SimulationBackend,
    pub chat: &'a dyn ChatClient,
    pub vqa: Option<&'a dyn VqaClient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub solved: Solved,
    /// Program text (after extraction) of the accepted reply.
    pub program_text: String,
    pub transcript: SessionTranscript,
}

impl SessionOutcome {
    pub fn scene(&self) -> &SceneState {
        &self.solved.scene
    }

    pub fn scene_file(&self, config: &SolveConfig) -> SceneFile {
        scene_file(&self.solved.scene, &self.program_text, config)
    }
}

/// Scene file with provenance for a solve of `program_text`.
pub fn scene_file(scene: &SceneState, program_text: &str, config: &SolveConfig) -> SceneFile {
    let provenance = Provenance {
        program_hash: program_hash(program_text),
        seed: config.seed,
        solver_config: serde_json::to_value(config).expect("solve configs serialize"),
    };
    SceneFile::from_scene(scene, provenance)
}

/// Runs the loop: request a program, solve it, and on failure send the
/// diagnosis back, up to `max_retries` more times. After a success the
/// scene is evaluated and, while enrichment rounds remain, the agent is
/// asked to extend it; a failed enrichment phase keeps the last good scene.
/// The success report of the final scene closes the transcript.
pub fn run_session(
    prompt: &str,
    config: &AgentConfig,
    env: SessionEnv<'_>,
) -> Result<SessionOutcome, AgentError> {
    let bounds = env.bounds;
    build_context(prompt, &bounds, None)?;
    let solve = &config.solve;
    let res = solve.grid.resolution;
    let mut transcript = SessionTranscript::new(prompt, bounds, solve.seed, &config.model);
    transcript.max_retries = Some(config.max_retries);
    transcript.enrichment_rounds = Some(config.enrichment_rounds);
    transcript.push_message(Role::System, SYSTEM_PROMPT);
    transcript.push_message(Role::User, user_message(prompt, &bounds));

    let mut previous: Option<(String, String)> = None;
    let mut best: Option<SessionOutcome> = None;
    let mut best_partial: Option<SceneState> = None;
    let mut round = 0;

    for phase in 0..=config.enrichment_rounds {
        let mut attempts = 0;
        loop {
            let messages = build_context(
                prompt,
                &bounds,
                previous.as_ref().map(|(r, f)| (r.as_str(), f.as_str())),
            )?;
            let response = match env.chat.complete(&messages) {
                Ok(r) => r,
                Err(message) => {
                    return Err(AgentError::Endpoint {
                        message,
                        transcript: Box::new(transcript),
                    })
                }
            };
            let response_index = transcript.push_message(Role::Assistant, response.clone());
            let program_text = extract_program(&response);
            attempts += 1;

            match solve_text(&program_text, env.catalog, bounds, env.backend, solve) {
                Ok(solved) => {
                    let options = SuccessOptions {
                        samples: config.stability_samples,
                        seed: solve.seed,
                        resolution: res,
                        prompt: prompt.to_string(),
                    };
                    let report =
                        success_report(&solved.scene, env.catalog, env.backend, &options, env.vqa)?;
                    let file = scene_file(&solved.scene, &program_text, solve);
                    let text = report.text.clone();
                    transcript.events.push(TranscriptEvent::Round(RoundRecord {
                        round,
                        response: response_index,
                        solved: true,
                        scene_hash: Some(program_hash(&file.to_json())),
                        report,
                    }));
                    round += 1;
                    best = Some(SessionOutcome {
                        solved,
                        program_text,
                        transcript: transcript.clone(),
                    });
                    let closing = if phase < config.enrichment_rounds {
                        enrichment_message(&text)
                    } else {
                        text
                    };
                    transcript.push_message(Role::User, closing.clone());
                    previous = Some((response, closing));
                    break;
                }
                Err(err) => {
                    let report = err.report(env.catalog, res);
                    if let Some(scene) = err.partial_scene() {
                        if best_partial.as_ref().is_none_or(|b| scene.len() > b.len()) {
                            best_partial = Some(scene.clone());
                        }
                    }
                    let feedback = feedback_message(&report.text);
                    transcript.events.push(TranscriptEvent::Round(RoundRecord {
                        round,
                        response: response_index,
                        solved: false,
                        scene_hash: None,
                        report,
                    }));
                    round += 1;
                    if attempts > config.max_retries {
                        return match best {
                            Some(mut outcome) => {
                                outcome.transcript = transcript;
                                Ok(outcome)
                            }
                            None => Err(AgentError::ExhaustedRetries {
                                attempts,
                                best_scene: best_partial.map(Box::new),
                                transcript: Box::new(transcript),
                            }),
                        };
                    }
                    transcript.push_message(Role::User, feedback.clone());
                    previous = Some((response, feedback));
                }
            }
        }
    }
    let mut outcome = best.expect("every phase ends in a success or an early return");
    outcome.transcript = transcript;
    Ok(outcome)
}

/// Solves a program file without an endpoint: a single attempt whose reply
/// is the file itself.
pub fn run_offline(
    prompt: &str,
    program_text: &str,
    config: &AgentConfig,
    env: SessionEnv<'_>,
) -> Result<SessionOutcome, AgentError> {
    let chat = ScriptedClient::new([program_text]);
    let config = AgentConfig {
        max_retries: 0,
        enrichment_rounds: 0,
        offline: true,
        ..config.clone()
    };
    run_session(prompt, &config, SessionEnv { chat: &chat, ..env })
}

/// Re-runs a recorded session, feeding back the recorded replies. The
/// recorded seed, model and budgets override `config`.
pub fn replay(
    transcript: &SessionTranscript,
    config: &AgentConfig,
    env: SessionEnv<'_>,
) -> Result<SessionOutcome, AgentError> {
    let chat = ScriptedClient::new(transcript.responses());
    let mut config = config.clone();
    config.solve.seed = transcript.seed;
    config.model = transcript.model.clone();
    config.max_retries = transcript.max_retries.unwrap_or(config.max_retries);
    config.enrichment_rounds = transcript
        .enrichment_rounds
        .unwrap_or(config.enrichment_rounds);
    run_session(
        &transcript.prompt,
        &config,
        SessionEnv {
            chat: &chat,
            bounds: transcript.bounds,
            ..env
        },
    )
}
