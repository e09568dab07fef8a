mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowplan::constraints::validate_plan;
use flowplan::data::Domain;
use flowplan::harness::{EvalContext, Suite};
use flowplan::llm::{CompletionRequest, LlmError, LlmProvider, RecordingProvider, ReplayProvider};
use flowplan::pipeline::{CorrectionStrategy, PipelineConfig, PipelineTrace, PlanOutcome, Planner};
use flowplan::plan::{Instruction, TaskType};
use flowplan::synth::{FaultConfig, SynthResponder};
use flowplan::Error;

/// Seeded provider producing plausible, broken and empty answers.
struct Adversary {
    rng: Mutex<ChaCha8Rng>,
    objects: Vec<String>,
}

impl Adversary {
    fn new(seed: u64, domain: &Domain) -> Self {
        let mut objects: Vec<String> = domain.vocabulary.objects.iter().cloned().collect();
        objects.extend(domain.vocabulary.landmarks.iter().cloned());
        objects.extend(["aple", "fridg", "", "mug mug", "xyz"].map(String::from));
        Self { rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)), objects }
    }

    fn answer(&self, stage: &str, rng: &mut ChaCha8Rng) -> String {
        let actions = ["pick_up", "put", "open", "close", "toggle_on", "toggle_off", "slice", "goto", "pickup", "jump"];
        match stage {
            "classify" => match rng.random_range(0..4) {
                0 => "no idea".into(),
                _ => TaskType::all().nth(rng.random_range(0..14)).unwrap().label(),
            },
            "reason" => {
                let n = rng.random_range(0..4);
                (1..=n).map(|i| format!("{i}. do thing {i}\n")).collect()
            }
            "correct" => (0..rng.random_range(0..3))
                .map(|_| format!("- {} -> {}\n", self.pick(rng), self.pick(rng)))
                .collect(),
            _ => {
                let n = rng.random_range(0..7);
                (1..=n)
                    .map(|i| {
                        let a = actions[rng.random_range(0..actions.len())];
                        if rng.random_bool(0.1) {
                            format!("{i}) ??? {a}\n")
                        } else {
                            format!("{i}. {a}({})\n", self.pick(rng))
                        }
                    })
                    .collect()
            }
        }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> String {
        self.objects[rng.random_range(0..self.objects.len())].clone()
    }
}

impl LlmProvider for Adversary {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        let mut rng = self.rng.lock().unwrap();
        Ok((0..request.n).map(|_| self.answer(&request.stage_id, &mut rng)).collect())
    }
}

/// Counts every request passed through.
struct Counting<P>(P, AtomicUsize);

impl<P: LlmProvider> LlmProvider for Counting<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        self.1.fetch_add(1, Ordering::SeqCst);
        self.0.complete(request)
    }
}

fn trace_of(result: &Result<PlanOutcome, Error>) -> Option<PipelineTrace> {
    match result {
        Ok(o) => Some(o.trace.without_timings()),
        Err(Error::PlanningExhausted { trace, .. }) => Some(trace.without_timings()),
        Err(_) => None,
    }
}

fn config(llm_correction: bool) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    if llm_correction {
        cfg.correction = CorrectionStrategy::Llm;
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn planning_is_bounded_traced_and_sound(seed in any::<u64>(), llm_correction in any::<bool>()) {
        let domain = Domain::alfred();
        let cfg = config(llm_correction);
        let planner = Planner::new(&domain, &cfg);
        let instruction = Instruction::new("put a washed apple in the fridge").unwrap();
        let provider = Counting(Adversary::new(seed, &domain), AtomicUsize::new(0));
        let result = planner.plan_full(&instruction, &provider);

        if let Err(Error::ClassificationFailed(_)) = &result {
            prop_assert_eq!(provider.1.load(Ordering::SeqCst), 1);
            return Ok(());
        }
        let trace = trace_of(&result);
        prop_assert!(trace.is_some(), "unexpected error: {:?}", result.as_ref().err());
        let trace = trace.unwrap();
        let bound = 1 + (cfg.max_replans + 1) * (2 + cfg.max_corrections);
        prop_assert!(trace.requests.len() <= bound, "{} > {bound}", trace.requests.len());
        prop_assert_eq!(trace.requests.len(), provider.1.load(Ordering::SeqCst));
        prop_assert!(trace.attempts.len() <= cfg.max_replans + 1);

        if let Ok(outcome) = &result {
            prop_assert!(outcome.report.is_valid());
            let again = validate_plan(&outcome.plan, &domain.profiles.get("alfred").unwrap().clone(), &domain.vocabulary);
            prop_assert!(again.is_valid());
            for step in &outcome.plan.steps {
                prop_assert!(step.primitive().is_some());
                prop_assert!(domain.vocabulary.accepts_object(step.primitive(), &step.object_label));
            }
        }

        let rerun = planner.plan_full(&instruction, &Adversary::new(seed, &domain));
        prop_assert_eq!(trace_of(&rerun), Some(trace));
    }
}

fn suite20() -> Suite {
    Suite::load(&common::data_dir().join("suites/suite20/suite.json")).unwrap()
}

#[test]
fn faulty_synthetic_model_still_yields_valid_plans() {
    let suite = suite20();
    let ctx = EvalContext::new(Domain::alfred());
    let planner = Planner::new(&ctx.domain, &ctx.pipeline);
    let faults = FaultConfig::faulty(11).schedule(suite.entries.len());
    for (entry, f) in suite.entries.iter().zip(faults) {
        let responder = SynthResponder::new(entry.task.clone(), f, ctx.table.clone(), ctx.domain.vocabulary.clone());
        let instruction = Instruction::new(&entry.instruction).unwrap();
        let outcome = planner.plan_full(&instruction, &responder).unwrap_or_else(|e| panic!("{}: {e}", entry.task.id));
        assert!(outcome.report.is_valid(), "{}", entry.task.id);
        assert_eq!(outcome.trace.task_type, Some(entry.task.task_type), "{}", entry.task.id);
    }
}

#[test]
fn replayed_planning_reproduces_the_recorded_trace() {
    let suite = suite20();
    let ctx = EvalContext::new(Domain::alfred());
    let planner = Planner::new(&ctx.domain, &ctx.pipeline);
    let faults = FaultConfig::faulty(5).schedule(suite.entries.len());
    for (entry, f) in suite.entries.iter().zip(faults).take(8) {
        let responder = SynthResponder::new(entry.task.clone(), f, ctx.table.clone(), ctx.domain.vocabulary.clone());
        let recorder = RecordingProvider::new(responder);
        let instruction = Instruction::new(&entry.instruction).unwrap();
        let recorded = trace_of(&planner.plan_full(&instruction, &recorder)).unwrap();
        let replay = ReplayProvider::new(&recorder.cassette());
        let replayed = trace_of(&planner.plan_full(&instruction, &replay)).unwrap();
        assert_eq!(replayed, recorded, "{}", entry.task.id);
        let again = trace_of(&planner.plan_full(&instruction, &replay.fork())).unwrap();
        assert_eq!(again, recorded, "{}", entry.task.id);
    }
}

#[test]
fn missing_recording_aborts_with_the_stage() {
    let domain = Domain::alfred();
    let cfg = PipelineConfig::default();
    let planner = Planner::new(&domain, &cfg);
    let replay = ReplayProvider::new(&flowplan::llm::Cassette::new());
    let err = planner.plan_full(&Instruction::new("heat a mug").unwrap(), &replay).unwrap_err();
    assert!(err.to_string().contains("classify"), "{err}");
}
