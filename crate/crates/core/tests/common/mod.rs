//! Helpers shared by the integration tests: a stub chat-completion server
//! and a brute-force path-length oracle.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use flowplan::llm::{CompletionRequest, LlmProvider};
use flowplan::pipeline::{
    PromptSet, STAGE_ALIGN, STAGE_CLASSIFY, STAGE_COLOCATE, STAGE_CORRECT, STAGE_REASON, STAGE_SYMBOLIC,
};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Stage of a rendered prompt, recognised by its template's first line.
pub fn stage_of(prompt: &str, prompts: &PromptSet) -> Option<&'static str> {
    let first = |t: &str| t.lines().next().unwrap_or_default().to_string();
    let head = first(prompt);
    [
        (STAGE_CLASSIFY, &prompts.classify),
        (STAGE_REASON, &prompts.reason),
        (STAGE_SYMBOLIC, &prompts.symbolic),
        (STAGE_CORRECT, &prompts.correct),
        (STAGE_COLOCATE, &prompts.colocate),
        (STAGE_ALIGN, &prompts.align),
    ]
    .into_iter()
    .find(|(_, t)| first(&t.text) == head)
    .map(|(s, _)| s)
}

/// What the stub server answers with.
pub enum Script {
    /// Forward to the current responder.
    Responder(Option<Box<dyn LlmProvider>>),
    /// Fixed status and body for every request.
    Status(u16, String),
    /// Fail with the first status `n` times, then forward.
    FailThen(u16, usize, Option<Box<dyn LlmProvider>>),
}

/// Local OpenAI-style endpoint answering from a swappable script.
pub struct StubServer {
    pub url: String,
    pub script: Arc<Mutex<Script>>,
    pub hits: Arc<AtomicUsize>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(prompts: PromptSet) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind stub server"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let script = Arc::new(Mutex::new(Script::Responder(None)));
        let hits = Arc::new(AtomicUsize::new(0));
        let handle = {
            let (server, script, hits) = (Arc::clone(&server), Arc::clone(&script), Arc::clone(&hits));
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    hits.fetch_add(1, Ordering::SeqCst);
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let (status, text) = answer(&body, &prompts, &mut script.lock().unwrap());
                    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                    let response = tiny_http::Response::from_string(text).with_status_code(status).with_header(header);
                    let _ = request.respond(response);
                }
            })
        };
        Self { url: format!("http://127.0.0.1:{port}/v1"), script, hits, server, handle: Some(handle) }
    }

    pub fn set(&self, script: Script) {
        *self.script.lock().unwrap() = script;
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn answer(body: &str, prompts: &PromptSet, script: &mut Script) -> (u16, String) {
    let forward = |responder: &Option<Box<dyn LlmProvider>>| -> (u16, String) {
        let Some(responder) = responder else { return (503, "no responder".into()) };
        let Ok(json) = serde_json::from_str::<serde_json::Value>(body) else { return (400, "bad json".into()) };
        let prompt = json["messages"][0]["content"].as_str().unwrap_or_default().to_string();
        let Some(stage) = stage_of(&prompt, prompts) else { return (400, "unknown prompt".into()) };
        let n = json["n"].as_u64().unwrap_or(1) as usize;
        let temperature = json["temperature"].as_f64().unwrap_or(1.0);
        let request = CompletionRequest::new(stage, prompt).with_n(n).with_temperature(temperature);
        match responder.complete(&request) {
            Ok(texts) => {
                let choices: Vec<_> = texts.iter().map(|t| serde_json::json!({"message": {"content": t}})).collect();
                (200, serde_json::json!({ "choices": choices }).to_string())
            }
            Err(e) => (500, e.to_string()),
        }
    };
    match script {
        Script::Responder(r) => forward(r),
        Script::Status(code, text) => (*code, text.clone()),
        Script::FailThen(code, left, r) => {
            if *left > 0 {
                *left -= 1;
                (*code, "try again".into())
            } else {
                forward(r)
            }
        }
    }
}

/// Length of the shortest 4-connected walk from `start` to any free cell
/// within Chebyshev distance 1 of `goal`, by repeated relaxation.
pub fn brute_force_path_length(width: usize, blocked: &[bool], start: (usize, usize), goal: (usize, usize)) -> Option<usize> {
    let n = width * width;
    let mut dist = vec![usize::MAX; n];
    dist[start.1 * width + start.0] = 0;
    loop {
        let mut changed = false;
        for i in 0..n {
            if blocked[i] || dist[i] == usize::MAX {
                continue;
            }
            let (x, y) = ((i % width) as i64, (i / width) as i64);
            for (dx, dy) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 || ny >= width as i64 {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if !blocked[j] && dist[i] + 1 < dist[j] {
                    dist[j] = dist[i] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n)
        .filter(|&i| {
            let (x, y) = (i % width, i / width);
            !blocked[i] && x.abs_diff(goal.0) <= 1 && y.abs_diff(goal.1) <= 1
        })
        .map(|i| dist[i])
        .filter(|&d| d != usize::MAX)
        .min()
}
