//! Deterministic stand-in for a language model, built from a generated task.
//!
//! It answers every pipeline stage the way a competent model would, with
//! optional fault injection on the symbolic stage. Recording it produces
//! cassettes for offline evaluation.

use std::collections::BTreeSet;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{label_similarity, lexical_correct, DEFAULT_SIMILARITY_THRESHOLD};
use crate::llm::{sha256_hex, CompletionRequest, LlmError, LlmProvider};
use crate::localization::{resolve_context, ColocationTable, InstanceList, InstanceRecord};
use crate::pipeline::{STAGE_ALIGN, STAGE_CLASSIFY, STAGE_COLOCATE, STAGE_CORRECT, STAGE_REASON, STAGE_SYMBOLIC};
use crate::plan::{render_steps, PrimitiveAction, SymbolicStep, TaskCategory, TaskPlan, Vocabulary};
use crate::sim::{CanonicalStep, TaskSpec};

/// Fault rates over a suite. Symbolic faults only hit the first answer for
/// each prompt, so a replanning round receives a clean answer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultConfig {
    pub seed: u64,
    /// Probability that one object label of the draft carries a typo.
    pub typo_rate: f64,
    /// Probability that the last `put` is moved before its `pick_up`.
    pub order_rate: f64,
    /// Probability that one classification vote names a wrong task type.
    pub minority_vote_rate: f64,
}

impl FaultConfig {
    pub fn clean(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }

    pub fn faulty(seed: u64) -> Self {
        Self { seed, typo_rate: 0.5, order_rate: 0.3, minority_vote_rate: 0.2 }
    }

    /// Faults for each of `n` episodes. Each kind hits exactly
    /// `round(rate * n)` episodes, picked by a seeded shuffle.
    pub fn schedule(&self, n: usize) -> Vec<EpisodeFaults> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut pick = |rate: f64| -> Vec<bool> {
            let k = ((rate.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
            let mut flags: Vec<bool> = (0..n).map(|i| i < k).collect();
            flags.shuffle(&mut rng);
            flags
        };
        let typo = pick(self.typo_rate);
        let misorder = pick(self.order_rate);
        let vote = pick(self.minority_vote_rate);
        (0..n)
            .map(|i| EpisodeFaults { seed: self.seed, typo: typo[i], misorder: misorder[i], minority_vote: vote[i] })
            .collect()
    }
}

/// Faults injected into one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpisodeFaults {
    pub seed: u64,
    pub typo: bool,
    pub misorder: bool,
    pub minority_vote: bool,
}

impl EpisodeFaults {
    pub fn none(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }
}

/// Which rendering of the task a stage answers with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    /// The generator's solution.
    Canonical,
    /// Written without the task rules: no switching off, slicing without
    /// fetching the knife.
    NoRules,
    /// Straight from the instruction: additionally no opening or closing.
    Direct,
}

pub struct SynthResponder {
    task: TaskSpec,
    faults: EpisodeFaults,
    table: ColocationTable,
    vocab: Vocabulary,
    seen: Mutex<BTreeSet<String>>,
}

impl SynthResponder {
    pub fn new(task: TaskSpec, faults: EpisodeFaults, table: ColocationTable, vocab: Vocabulary) -> Self {
        Self { task, faults, table, vocab, seen: Mutex::new(BTreeSet::new()) }
    }

    fn rng(&self, key: &str) -> ChaCha8Rng {
        let digest = sha256_hex(format!("{}\n{}\n{}", self.faults.seed, self.task.id, key).as_bytes());
        let seed = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn steps(&self, variant: Variant) -> Vec<CanonicalStep> {
        let mut steps = self.task.canonical.clone();
        if variant == Variant::Canonical {
            return steps;
        }
        steps.retain(|s| s.action != PrimitiveAction::ToggleOff);
        if self.task.task_type.slicing {
            if let Some(i) = steps.iter().position(|s| s.action == PrimitiveAction::PickUp && s.label == "knife") {
                steps.remove(i);
            }
            if let Some(i) = steps.iter().position(|s| s.action == PrimitiveAction::Slice) {
                if steps.get(i + 1).is_some_and(|s| s.action == PrimitiveAction::Put) {
                    steps.remove(i + 1);
                }
            }
        }
        if variant == Variant::Direct {
            steps.retain(|s| !matches!(s.action, PrimitiveAction::Open | PrimitiveAction::Close));
        }
        steps
    }

    fn language(&self, variant: Variant) -> String {
        let mut held: Option<String> = None;
        let lines: Vec<String> = self
            .steps(variant)
            .iter()
            .map(|s| {
                let name = s.label.replace('_', " ");
                let text = match s.action {
                    PrimitiveAction::PickUp => {
                        held = Some(name.clone());
                        format!("Pick up the {name}")
                    }
                    PrimitiveAction::Put => {
                        let what = held.take().unwrap_or_else(|| "it".into());
                        match &s.context {
                            Some(c) => format!("Put the {what} in {c}"),
                            None => format!("Put the {what} in the {name}"),
                        }
                    }
                    PrimitiveAction::Open => format!("Open the {name}"),
                    PrimitiveAction::Close => format!("Close the {name}"),
                    PrimitiveAction::ToggleOn => format!("Switch on the {name}"),
                    PrimitiveAction::ToggleOff => format!("Switch off the {name}"),
                    PrimitiveAction::Slice => format!("Slice the {name}"),
                    PrimitiveAction::GotoLandmark => format!("Go to the {name}"),
                };
                match (&s.context, s.action) {
                    (Some(c), a) if a != PrimitiveAction::Put => format!("{text} ({c})"),
                    _ => text,
                }
            })
            .collect();
        lines.iter().enumerate().map(|(i, l)| format!("{}. {l}", i + 1)).collect::<Vec<_>>().join("\n")
    }

    fn symbolic_steps(&self, variant: Variant) -> Vec<SymbolicStep> {
        self.steps(variant)
            .iter()
            .enumerate()
            .map(|(i, s)| SymbolicStep::new(i + 1, s.action, &s.label, s.context.as_deref()))
            .collect()
    }

    fn classify(&self, request: &CompletionRequest) -> Vec<String> {
        let label = self.task.task_type.label();
        let mut out = vec![label; request.n];
        let mut rng = self.rng(&request.key());
        if request.n >= 3 && self.faults.minority_vote {
            let others: Vec<TaskCategory> =
                TaskCategory::ALL.into_iter().filter(|c| *c != self.task.task_type.category).collect();
            let wrong = others[rng.random_range(0..others.len())];
            out[request.n - 1] = wrong.label().to_string();
        }
        out
    }

    fn reason(&self, prompt: &str) -> String {
        let variant = if prompt.contains("Task description: (none)") { Variant::NoRules } else { Variant::Canonical };
        self.language(variant)
    }

    fn symbolic(&self, request: &CompletionRequest) -> String {
        let prompt = &request.prompt;
        let variant = if prompt.contains("\nInstruction:\n") {
            Some(Variant::Direct)
        } else {
            [Variant::Canonical, Variant::NoRules]
                .into_iter()
                .find(|v| prompt.contains(&format!("Language plan:\n{}\nAction sequence:", self.language(*v))))
        };
        let Some(variant) = variant else {
            return "I cannot translate this input.".into();
        };
        let mut steps = self.symbolic_steps(variant);
        let key = request.key();
        let first = self.seen.lock().unwrap().insert(key.clone());
        if first {
            let mut rng = self.rng(&key);
            if self.faults.typo {
                self.inject_typo(&mut steps, &mut rng);
            }
            if self.faults.misorder {
                misorder(&mut steps);
            }
        }
        render_steps(&steps)
    }

    /// Corrupt one label of a step the task cannot do without. The typo is
    /// kept only if lexical correction maps it back.
    fn inject_typo(&self, steps: &mut [SymbolicStep], rng: &mut ChaCha8Rng) {
        let critical: Vec<usize> = steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s.primitive(), Some(PrimitiveAction::Close | PrimitiveAction::ToggleOff)))
            .map(|(i, _)| i)
            .collect();
        if critical.is_empty() {
            return;
        }
        let i = critical[rng.random_range(0..critical.len())];
        let original = steps[i].object_label.clone();
        for _ in 0..20 {
            let typo = corrupt(&original, rng);
            if typo == original || self.vocab.objects.contains(&typo) || self.vocab.landmarks.contains(&typo) {
                continue;
            }
            let mut probe = steps[i].clone();
            probe.object_label = typo.clone();
            let fixed = lexical_correct(&TaskPlan::new(vec![probe], self.task.task_type), &self.vocab, DEFAULT_SIMILARITY_THRESHOLD);
            if fixed.plan.steps[0].object_label == original {
                steps[i].object_label = typo;
                return;
            }
        }

    }

    fn colocate(&self, prompt: &str) -> String {
        let target = line_value(prompt, "Target object:").unwrap_or_default();
        let landmarks = line_value(prompt, "Observed landmarks:").unwrap_or_default();
        landmarks
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| format!("{l}: {}", self.table.get(&target, l)))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn correct(&self, prompt: &str) -> String {
        let mut valid: Vec<String> = Vec::new();
        for heading in ["Valid actions:", "Valid objects:"] {
            if let Some(list) = line_value(prompt, heading) {
                valid.extend(list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()));
            }
        }
        section(prompt, "Invalid labels:", "Replacements:")
            .iter()
            .map(|bad| {
                let best = valid
                    .iter()
                    .map(|v| (label_similarity(bad, v), v))
                    .filter(|(s, _)| *s >= DEFAULT_SIMILARITY_THRESHOLD)
                    .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)));
                match best {
                    Some((_, v)) => format!("{bad} -> {v}"),
                    None => format!("{bad} -> none"),
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn align(&self, prompt: &str) -> String {
        let target = line_value(prompt, "Target:").unwrap_or_default();
        let context = line_value(prompt, "Description:").unwrap_or_default();
        let mut instances = InstanceList::default();
        for line in section(prompt, "Observed instances (id label x y):", "Instance id:") {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if let [id, label, x, y] = parts[..] {
                if let (Ok(x), Ok(y)) = (x.parse(), y.parse()) {
                    instances.upsert(InstanceRecord { id: id.into(), label: label.into(), x, y });
                }
            }
        }
        let step = SymbolicStep::new(1, PrimitiveAction::Put, &target, Some(&context));
        resolve_context(&step, &instances).map(|r| r.id).unwrap_or_else(|| "none".into())
    }
}

impl LlmProvider for SynthResponder {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        request.validate()?;
        let one = |text: String| vec![text; request.n];
        Ok(match request.stage_id.as_str() {
            STAGE_CLASSIFY => self.classify(request),
            STAGE_REASON => one(self.reason(&request.prompt)),
            STAGE_SYMBOLIC => one(self.symbolic(request)),
            STAGE_COLOCATE => one(self.colocate(&request.prompt)),
            STAGE_CORRECT => one(self.correct(&request.prompt)),
            STAGE_ALIGN => one(self.align(&request.prompt)),
            other => return Err(LlmError::InvalidRequest(format!("unknown stage `{other}`"))),
        })
    }
}

fn line_value(prompt: &str, prefix: &str) -> Option<String> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(|v| v.trim().to_string())
}

/// Non-empty lines strictly between the `start` and `end` header lines.
fn section(prompt: &str, start: &str, end: &str) -> Vec<String> {
    prompt
        .lines()
        .skip_while(|l| l.trim() != start)
        .skip(1)
        .take_while(|l| l.trim() != end)
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn corrupt(label: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = label.chars().collect();
    if chars.len() < 3 {
        chars.push(chars[chars.len() - 1]);
        return chars.into_iter().collect();
    }
    let i = rng.random_range(1..chars.len() - 1);
    match rng.random_range(0..3) {
        0 => chars.swap(i, i + 1),
        1 => {
            chars.remove(i);
        }
        _ => chars.insert(i, chars[i]),
    }
    chars.into_iter().collect()
}

/// Move the last `put` in front of the closest `pick_up` before it, so the
/// put happens with an empty hand.
fn misorder(steps: &mut Vec<SymbolicStep>) {
    let Some(p) = steps.iter().rposition(|s| s.primitive() == Some(PrimitiveAction::Put)) else { return };
    let Some(q) = steps[..p].iter().rposition(|s| s.primitive() == Some(PrimitiveAction::PickUp)) else { return };
    let put = steps.remove(p);
    steps.insert(q, put);
    for (i, s) in steps.iter_mut().enumerate() {
        s.index = i + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::validate_plan;
    use crate::data;
    use crate::pipeline::{Ablation, PipelineConfig, Planner};
    use crate::plan::Instruction;
    use crate::sim::{generate_task_suite, TaskKind, DEFAULT_WIDTH};
    use crate::plan::{TaskCategory, TaskType};

    fn task(category: TaskCategory, slicing: bool) -> (TaskSpec, String) {
        let kind = TaskKind::plain(TaskType::new(category, slicing));
        let g = generate_task_suite(11, &[(kind, 1)], DEFAULT_WIDTH, &data::colocation_table()).remove(0);
        (g.task, g.instruction)
    }

    fn responder(task: TaskSpec, faults: EpisodeFaults) -> SynthResponder {
        SynthResponder::new(task, faults, data::colocation_table(), data::alfred_vocabulary())
    }

    fn plan(task: &TaskSpec, instruction: &str, faults: EpisodeFaults, ablation: Ablation) -> crate::Result<TaskPlan> {
        let domain = data::Domain::alfred();
        let cfg = PipelineConfig { ablation, ..Default::default() };
        let r = responder(task.clone(), faults);
        Planner::new(&domain, &cfg).plan_full(&Instruction::new(instruction).unwrap(), &r).map(|o| o.plan)
    }

    #[test]
    fn clean_answers_reproduce_the_canonical_plan() {
        for (cat, slicing) in [(TaskCategory::HeatPlace, false), (TaskCategory::PickPlace, true)] {
            let (t, instr) = task(cat, slicing);
            let p = plan(&t, &instr, EpisodeFaults::none(1), Ablation::default()).unwrap();
            assert_eq!(render_steps(&p.steps), render_steps(&t.canonical_plan().steps));
        }
    }

    #[test]
    fn faulty_answers_are_repaired_by_evaluation() {
        let (t, instr) = task(TaskCategory::CoolPlace, false);
        for seed in 0..10 {
            let faults = EpisodeFaults { seed, typo: true, misorder: seed % 2 == 0, minority_vote: seed % 3 == 0 };
            let p = plan(&t, &instr, faults, Ablation::default()).unwrap();
            assert_eq!(render_steps(&p.steps), render_steps(&t.canonical_plan().steps), "seed {seed}");
        }
    }

    #[test]
    fn without_rules_switch_off_is_missing() {
        let (t, instr) = task(TaskCategory::HeatPlace, false);
        let ab = Ablation { no_task_info: true, ..Default::default() };
        assert!(matches!(plan(&t, &instr, EpisodeFaults::none(1), ab), Err(crate::Error::PlanningExhausted { .. })));
    }

    #[test]
    fn typos_and_misorders_are_detectable() {
        let (t, _) = task(TaskCategory::PickPlace, false);
        let r = responder(t.clone(), EpisodeFaults { seed: 3, typo: true, misorder: true, minority_vote: false });
        let mut steps = r.symbolic_steps(Variant::Canonical);
        let mut rng = r.rng("k");
        r.inject_typo(&mut steps, &mut rng);
        misorder(&mut steps);
        let report = validate_plan(&TaskPlan::new(steps, t.task_type), &data::alfred_rules(), &data::alfred_vocabulary());
        assert!(!report.unknown_labels.is_empty());
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn schedule_hits_exact_counts() {
        let s = FaultConfig::faulty(9).schedule(40);
        assert_eq!(s.iter().filter(|f| f.typo).count(), 20);
        assert_eq!(s.iter().filter(|f| f.misorder).count(), 12);
        assert_eq!(s, FaultConfig::faulty(9).schedule(40));
    }

    #[test]
    fn colocation_answers_come_from_the_table() {
        let (t, _) = task(TaskCategory::PickPlace, false);
        let r = responder(t, EpisodeFaults::none(0));
        let text = r.colocate("Target object: knife\nObserved landmarks: countertop, sofa\nProbabilities:");
        assert_eq!(text, "countertop: 0.9\nsofa: 0.05");
    }
}
