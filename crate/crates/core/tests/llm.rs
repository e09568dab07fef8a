mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;

use common::{Script, StubServer};
use flowplan::llm::{
    majority_vote, Cassette, CompletionRequest, LiveProvider, LlmError, LlmProvider, RecordingProvider, ReplayProvider,
    ScriptedProvider,
};
use flowplan::pipeline::{PromptSet, STAGE_CLASSIFY};
use flowplan::plan::{parse_task_label, TaskType};

/// Answers with a counter so every response is distinct.
fn counting_provider() -> ScriptedProvider {
    let counter = AtomicUsize::new(0);
    ScriptedProvider::from_fn(move |r| {
        Ok((0..r.n).map(|_| format!("{}#{}", r.stage_id, counter.fetch_add(1, Ordering::SeqCst))).collect())
    })
}

fn request_strategy() -> impl Strategy<Value = Vec<CompletionRequest>> {
    prop::collection::vec((0usize..3, 0usize..4, 1usize..4, prop::bool::ANY), 1..30).prop_map(|raw| {
        raw.into_iter()
            .map(|(stage, prompt, n, hot)| {
                CompletionRequest::new(["classify", "reason", "symbolic"][stage], format!("prompt {prompt}"))
                    .with_n(n)
                    .with_temperature(if hot { 1.0 } else { 0.0 })
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn replay_returns_the_recorded_sequence(requests in request_strategy()) {
        let recorder = RecordingProvider::new(counting_provider());
        let recorded: Vec<Vec<String>> = requests.iter().map(|r| recorder.complete(r).unwrap()).collect();
        let text = serde_json::to_string(&recorder.cassette()).unwrap();
        let cassette: Cassette = serde_json::from_str(&text).unwrap();
        let replay = ReplayProvider::new(&cassette);
        for (r, expected) in requests.iter().zip(&recorded) {
            prop_assert_eq!(&replay.complete(r).unwrap(), expected);
        }
        let fork = replay.fork();
        prop_assert_eq!(&fork.complete(&requests[0]).unwrap(), &recorded[0]);
        let extra = requests[0].clone();
        let err = replay.complete(&extra.with_n(5)).unwrap_err();
        let is_miss = matches!(err, LlmError::CassetteMiss { .. });
        prop_assert!(is_miss);
    }

    #[test]
    fn keys_separate_every_identity_field(stage in "[a-z]{1,6}", prompt in ".{0,40}", n in 1usize..5, t in 0u8..20) {
        let temperature = f64::from(t) / 10.0;
        let base = CompletionRequest::new(&stage, &prompt).with_n(n).with_temperature(temperature);
        prop_assert_eq!(base.key(), base.clone().with_max_tokens(7).key());
        prop_assert_ne!(base.key(), CompletionRequest::new(format!("{stage}x"), &prompt).with_n(n).with_temperature(temperature).key());
        prop_assert_ne!(base.key(), CompletionRequest::new(&stage, format!("{prompt}x")).with_n(n).with_temperature(temperature).key());
        prop_assert_ne!(base.key(), base.clone().with_n(n + 1).key());
        prop_assert_ne!(base.key(), base.clone().with_temperature(temperature + 0.05).key());
    }

    #[test]
    fn vote_ignores_appended_garbage(
        picks in prop::collection::vec(0usize..14, 1..9),
        junk in prop::collection::vec("[#@!]{0,3}[a-z ]{0,12}", 0..6),
    ) {
        let types: Vec<TaskType> = TaskType::all().collect();
        let responses: Vec<String> = picks.iter().map(|&i| types[i].label()).collect();
        let before = majority_vote(&responses, parse_task_label).unwrap();
        let unparseable: Vec<String> = junk.into_iter().filter(|j| parse_task_label(j).is_err()).collect();
        let mut padded = responses.clone();
        padded.extend(unparseable);
        prop_assert_eq!(majority_vote(&padded, parse_task_label).unwrap(), before);

        // Oracle: highest count, earliest first appearance on ties.
        let count = |t: &TaskType| responses.iter().filter(|r| parse_task_label(r).ok().as_ref() == Some(t)).count();
        let best = picks.iter().map(|&i| types[i]).max_by(|a, b| {
            count(a).cmp(&count(b)).then_with(|| {
                let pos = |t: &TaskType| picks.iter().position(|&i| types[i] == *t).unwrap();
                pos(b).cmp(&pos(a))
            })
        });
        prop_assert_eq!(Some(before), best);
    }
}

#[test]
fn vote_without_parseable_responses_fails() {
    let responses = vec!["nonsense".to_string(), String::new()];
    assert_eq!(majority_vote(&responses, parse_task_label).unwrap_err().0, 2);
}

#[test]
fn replay_miss_names_the_stage() {
    let replay = ReplayProvider::new(&Cassette::new());
    let err = replay.complete(&CompletionRequest::new("symbolic", "hello")).unwrap_err();
    assert!(matches!(&err, LlmError::CassetteMiss { stage_id, .. } if stage_id == "symbolic"));
    assert!(err.to_string().contains("symbolic"));
}

#[test]
fn prefix_merge_keeps_the_longer_recording_and_rejects_conflicts() {
    let req = CompletionRequest::new("classify", "p");
    let mut short = Cassette::new();
    short.append(&req, &["a".into()]);
    let mut long = Cassette::new();
    long.append(&req, &["a".into(), "b".into()]);
    short.merge_prefix(&long).unwrap();
    assert_eq!(short.get(&req.key()).unwrap().responses, vec!["a", "b"]);

    let mut other = Cassette::new();
    other.append(&req, &["z".into()]);
    assert!(matches!(short.merge_prefix(&other), Err(LlmError::Cassette(_))));
}

fn classify_prompt(prompts: &PromptSet) -> String {
    prompts.classify.text.clone()
}

fn live(server: &StubServer, retries: u32) -> LiveProvider {
    LiveProvider::new(&server.url, Some("k".into()), "stub").with_backoff(Duration::from_millis(1)).with_max_retries(retries)
}

fn echo() -> Option<Box<dyn LlmProvider>> {
    Some(Box::new(ScriptedProvider::from_fn(|r| Ok(vec!["Pick & Place".to_string(); r.n]))))
}

#[test]
fn live_provider_retries_server_errors() {
    let prompts = PromptSet::default();
    let server = StubServer::start(prompts.clone());
    server.set(Script::FailThen(500, 2, echo()));
    let request = CompletionRequest::new(STAGE_CLASSIFY, classify_prompt(&prompts)).with_n(3);
    let out = live(&server, 3).complete(&request).unwrap();
    assert_eq!(out, vec!["Pick & Place"; 3]);
    assert_eq!(server.hits(), 3);
}

#[test]
fn live_provider_gives_up_after_retries() {
    let prompts = PromptSet::default();
    let server = StubServer::start(prompts.clone());
    server.set(Script::Status(429, "slow down".into()));
    let request = CompletionRequest::new(STAGE_CLASSIFY, classify_prompt(&prompts));
    let err = live(&server, 2).complete(&request).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 3, .. }), "{err}");
    assert_eq!(server.hits(), 3);
}

#[test]
fn live_provider_does_not_retry_client_errors() {
    let prompts = PromptSet::default();
    let server = StubServer::start(prompts.clone());
    server.set(Script::Status(400, "bad request".into()));
    let request = CompletionRequest::new(STAGE_CLASSIFY, classify_prompt(&prompts));
    let err = live(&server, 3).complete(&request).unwrap_err();
    assert!(matches!(&err, LlmError::ProviderRefusal { status: 400, message } if message.contains("bad request")), "{err}");
    assert_eq!(server.hits(), 1);
}

/// Ignores `n` and always returns a single numbered choice.
struct OneChoice(Arc<AtomicUsize>);

impl LlmProvider for OneChoice {
    fn complete(&self, _: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        Ok(vec![format!("choice {}", self.0.fetch_add(1, Ordering::SeqCst))])
    }
}

#[test]
fn live_provider_tops_up_short_answers() {
    let prompts = PromptSet::default();
    let server = StubServer::start(prompts.clone());
    server.set(Script::Responder(Some(Box::new(OneChoice(Arc::new(AtomicUsize::new(0)))))));
    let request = CompletionRequest::new(STAGE_CLASSIFY, classify_prompt(&prompts)).with_n(4);
    let out = live(&server, 0).complete(&request).unwrap();
    assert_eq!(out, vec!["choice 0", "choice 1", "choice 2", "choice 3"]);
    assert_eq!(server.hits(), 4);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let provider = LiveProvider::new(&format!("http://127.0.0.1:{port}/v1"), None, "stub")
        .with_backoff(Duration::from_millis(1))
        .with_max_retries(1);
    let err = provider.complete(&CompletionRequest::new("classify", "x")).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 2, .. }), "{err}");
}
