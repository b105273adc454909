mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::time::Duration;

use common::{catalog, table};
use serde_json::Value;
use tabletop::agent::{
    build_context, feedback_message, replay, run_offline, run_session, table_bbox, AgentConfig,
    AgentError, ChatClient, HttpChatClient, Role, ScriptedClient, SessionEnv, SessionTranscript,
    SYSTEM_PROMPT,
};
use tabletop::catalog::Catalog;
use tabletop::feedback::Channel;
use tabletop::physics::QuasiStatic;

const GOOD: &str = r#"[
    ["laptop_0", "a slim silver laptop computer"],
    ["laptop_0", "PLACE-ON-BASE", "root", {"x": 0.0, "y": 0.0}],
    ["laptop_0", "FACING-FRONT", "root", {}],
    ["cup_0", "a ceramic cup mug"],
    ["cup_0", "PLACE-ON-BASE", "root", {}],
    ["cup_0", "RIGHT-OF", "laptop_0", {"distance": 0.1}],
    ["cup_0", "ALIGN-CENTER-FB", "laptop_0", {}],
    ["cup_0", "FACING-FRONT", "root", {}]
]"#;

/// GOOD plus a book, written the way the example in the system prompt is:
/// no commas between entries, inside a code fence.
const RICHER: &str = "```json\n[\n    [\"laptop_0\", \"a slim silver laptop computer\"]\n    [\"laptop_0\", \"PLACE-ON-BASE\", \"root\", {\"x\": 0.0, \"y\": 0.0}]\n    [\"laptop_0\", \"FACING-FRONT\", \"root\", {}]\n    [\"cup_0\", \"a ceramic cup mug\"]\n    [\"cup_0\", \"PLACE-ON-BASE\", \"root\", {}]\n    [\"cup_0\", \"RIGHT-OF\", \"laptop_0\", {\"distance\": 0.1}]\n    [\"cup_0\", \"ALIGN-CENTER-FB\", \"laptop_0\", {}]\n    [\"cup_0\", \"FACING-FRONT\", \"root\", {}]\n    [\"book_0\", \"a book\"]\n    [\"book_0\", \"PLACE-ANYWHERE\", \"root\", {}]\n]\n```";

const BAD_GRAMMAR: &str = r#"[["cup_0", "a ceramic cup mug"], ["cup_0", "PLACE-ON", "root", {}]]"#;

fn config() -> AgentConfig {
    AgentConfig {
        enrichment_rounds: 0,
        stability_samples: 8,
        ..Default::default()
    }
}

fn env<'a>(cat: &'a Catalog, backend: &'a QuasiStatic, chat: &'a dyn ChatClient) -> SessionEnv<'a> {
    SessionEnv {
        catalog: cat,
        bounds: table(),
        backend,
        chat,
        vqa: None,
    }
}

#[test]
fn context_shapes() {
    let b = table();
    let fresh = build_context("a desk", &b, None).unwrap();
    assert_eq!(fresh.len(), 2);
    assert_eq!(fresh[0].role, Role::System);
    assert_eq!(fresh[0].content, SYSTEM_PROMPT);
    assert_eq!(
        fresh[1].content,
        format!(
            "The xy extend of the table is {}.\n The scene description is \"a desk\".",
            table_bbox(&b)
        )
    );
    assert_eq!(table_bbox(&b), "x: [-0.5, 0.5], y: [-0.5, 0.5]");

    let fb = feedback_message("- `cup_0` fell over when the scene was settled.");
    let retry = build_context("a desk", &b, Some(("[]", &fb))).unwrap();
    assert_eq!(retry.len(), 4);
    assert_eq!(retry[2].role, Role::Assistant);
    assert_eq!(retry[3].role, Role::User);
    assert!(retry[3]
        .content
        .starts_with("There are some errors in previous response. Here's the feedback - `cup_0`"));

    assert!(matches!(
        build_context("  ", &b, None),
        Err(AgentError::EmptyPrompt)
    ));
}

#[test]
fn offline_program_makes_no_calls() {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let unused = ScriptedClient::new(Vec::<String>::new());
    let out = run_offline("a desk", GOOD, &config(), env(&cat, &backend, &unused)).unwrap();
    assert_eq!(unused.calls(), 0);
    assert_eq!(out.scene().len(), 2);
    assert_eq!(out.transcript.messages().count(), 4);
}

#[test]
fn invalid_then_valid_takes_two_rounds() {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let chat = ScriptedClient::new([BAD_GRAMMAR, GOOD]);
    let out = run_session("a desk", &config(), env(&cat, &backend, &chat)).unwrap();
    assert_eq!(chat.calls(), 2);
    let t = &out.transcript;
    let rounds: Vec<_> = t.rounds().collect();
    assert_eq!(rounds.len(), 2);
    assert!(!rounds[0].solved && rounds[1].solved);
    assert_eq!(rounds[0].report.channel, Channel::Grammar);
    assert_eq!(rounds[1].report.channel, Channel::Success);

    let messages: Vec<_> = t.messages().collect();
    assert_eq!(messages.len(), 6);
    let roles: Vec<Role> = messages.iter().map(|m| m.role).collect();
    assert_eq!(
        roles,
        [
            Role::System,
            Role::User,
            Role::Assistant,
            Role::User,
            Role::Assistant,
            Role::User
        ]
    );
    // Feedback is exactly the rendered report inside the retry template.
    assert_eq!(
        messages[3].content,
        feedback_message(&rounds[0].report.text)
    );
    assert_eq!(messages[5].content, rounds[1].report.text);
    assert_eq!(out.scene().len(), 2);
}

#[test]
fn garbage_exhausts_the_retries() {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let chat = ScriptedClient::new(["I cannot help with that."; 10]);
    let cfg = AgentConfig {
        max_retries: 2,
        ..config()
    };
    let err = run_session("a desk", &cfg, env(&cat, &backend, &chat)).unwrap_err();
    let AgentError::ExhaustedRetries {
        attempts,
        transcript,
        best_scene,
    } = err
    else {
        panic!("expected exhausted retries")
    };
    assert_eq!(attempts, 3);
    assert_eq!(chat.calls(), 3);
    assert_eq!(transcript.rounds().count(), 3);
    assert!(best_scene.is_none());
}

fn two_round_files() -> (String, String) {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let chat = ScriptedClient::new([BAD_GRAMMAR, GOOD]);
    let cfg = config();
    let out = run_session("a desk", &cfg, env(&cat, &backend, &chat)).unwrap();
    (
        out.scene_file(&cfg.solve).to_json(),
        out.transcript.to_jsonl(),
    )
}

#[test]
fn scripted_sessions_replay_byte_for_byte() {
    let (scene_a, transcript_a) = two_round_files();
    let (scene_b, transcript_b) = two_round_files();
    assert_eq!(scene_a, scene_b);
    assert_eq!(transcript_a, transcript_b);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    std::fs::write(&path, &transcript_a).unwrap();
    let loaded = SessionTranscript::load(&path).unwrap();
    assert_eq!(loaded.to_jsonl(), transcript_a);

    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let unused = ScriptedClient::new(Vec::<String>::new());
    let again = replay(&loaded, &config(), env(&cat, &backend, &unused)).unwrap();
    assert_eq!(again.transcript.to_jsonl(), transcript_a);
    assert_eq!(again.scene_file(&config().solve).to_json(), scene_a);
}

#[test]
fn enrichment_extends_the_scene() {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let chat = ScriptedClient::new([GOOD, RICHER]);
    let cfg = AgentConfig {
        enrichment_rounds: 1,
        ..config()
    };
    let out = run_session("a desk", &cfg, env(&cat, &backend, &chat)).unwrap();
    assert_eq!(out.scene().len(), 3);
    let messages: Vec<_> = out.transcript.messages().collect();
    assert_eq!(messages.len(), 6);
    assert!(messages[3]
        .content
        .starts_with("The scene was built successfully. Here's the feedback"));
}

#[test]
fn failed_enrichment_keeps_the_last_scene() {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    let chat = ScriptedClient::new([GOOD, BAD_GRAMMAR, BAD_GRAMMAR]);
    let cfg = AgentConfig {
        enrichment_rounds: 1,
        max_retries: 1,
        ..config()
    };
    let out = run_session("a desk", &cfg, env(&cat, &backend, &chat)).unwrap();
    assert_eq!(chat.calls(), 3);
    assert_eq!(out.scene().len(), 2);
    assert_eq!(out.transcript.rounds().count(), 3);
}

/// Serves one canned chat-completions reply and hands back the request body.
fn one_shot_server(reply: &'static str) -> (String, std::thread::JoinHandle<Value>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line.trim().is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let mut stream = stream;
        write!(stream, "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}", reply.len()).unwrap();
        serde_json::from_slice(&body).unwrap()
    });
    (url, handle)
}

#[test]
fn http_client_speaks_chat_completions() {
    let (url, server) =
        one_shot_server(r#"{"choices": [{"message": {"role": "assistant", "content": "[]"}}]}"#);
    let client = HttpChatClient::new(
        &url,
        "test-model",
        Some("k".into()),
        0.5,
        Duration::from_secs(10),
    );
    let messages = build_context("a desk", &table(), None).unwrap();
    assert_eq!(client.complete(&messages).unwrap(), "[]");
    let body = server.join().unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(body["messages"].as_array().unwrap().len(), 2);
    assert_eq!(body["messages"][0]["role"], "system");
}

#[test]
fn unreachable_endpoint_is_an_endpoint_error() {
    let cat = catalog();
    let backend = QuasiStatic::new(0.01);
    // Bind and drop a listener to get a port nothing listens on.
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let client = HttpChatClient::new(
        &format!("http://127.0.0.1:{port}"),
        "m",
        None,
        0.0,
        Duration::from_secs(5),
    );
    let err = run_session("a desk", &config(), env(&cat, &backend, &client)).unwrap_err();
    let AgentError::Endpoint { transcript, .. } = err else {
        panic!("expected an endpoint error")
    };
    assert_eq!(transcript.messages().count(), 2);
}
