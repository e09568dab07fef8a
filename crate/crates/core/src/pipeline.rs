//! The cascaded task planner: classification by vote, language-level
//! reasoning, symbolic planning, then code-based evaluation with label
//! correction and bounded re-planning.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{
    lexical_correct, validate_plan, ConstraintConfig, CorrectionOutcome, LabelChange, LabelField,
    ProfileRegistry, Uncorrectable, ValidationReport, Verdict, DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::llm::{majority_vote, CompletionRequest, LlmError, LlmProvider, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use crate::plan::{
    normalize_label, parse_language_plan, parse_symbolic_plan_text, parse_task_label, render_plan,
    ActionLabel, Instruction, LanguagePlan, ParseIssue, PrimitiveAction, TaskCategory, TaskPlan,
    TaskType, Vocabulary,
};

pub const STAGE_CLASSIFY: &str = "classify";
pub const STAGE_REASON: &str = "reason";
pub const STAGE_SYMBOLIC: &str = "symbolic";
pub const STAGE_CORRECT: &str = "correct";
pub const STAGE_COLOCATE: &str = "colocate";
pub const STAGE_ALIGN: &str = "align";

pub const DEFAULT_VOTE_N: usize = 3;
pub const DEFAULT_MAX_CORRECTIONS: usize = 2;
pub const DEFAULT_MAX_REPLANS: usize = 3;

/// Task description and rules handed to the reasoning stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub description: String,
    pub rules: Vec<String>,
    pub constraint_profile_id: String,
}

impl TaskInfo {
    /// Info with no description or rules, keeping the profile for validation.
    pub fn empty(constraint_profile_id: &str) -> Self {
        Self { description: String::new(), rules: Vec::new(), constraint_profile_id: constraint_profile_id.into() }
    }
}

/// Task info for every task type, keyed as `<category>[+slicing]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskInfoRegistry {
    entries: BTreeMap<String, TaskInfo>,
}

impl TaskInfoRegistry {
    pub fn new(entries: BTreeMap<String, TaskInfo>) -> Result<Self> {
        for key in entries.keys() {
            if TaskType::from_key(key).is_none() {
                return Err(Error::Registry(format!("unknown task key `{key}`")));
            }
        }
        if let Some(missing) = TaskType::all().find(|t| !entries.contains_key(&t.key())) {
            return Err(Error::Registry(format!("missing entry for `{}`", missing.key())));
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::read_text(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("registry serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_text(path, &(self.to_json() + "\n"))
    }

    pub fn get(&self, task_type: TaskType) -> &TaskInfo {
        &self.entries[&task_type.key()]
    }
}

pub fn retrieve_task_info(task_type: TaskType, registry: &TaskInfoRegistry) -> TaskInfo {
    registry.get(task_type).clone()
}

/// A prompt with `{{slot}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(name: &str, text: &str) -> Self {
        Self { name: name.into(), text: text.into() }
    }

    pub fn slots(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            let Some(len) = rest[start + 2..].find("}}") else { break };
            out.push(rest[start + 2..start + 2 + len].trim().to_string());
            rest = &rest[start + 2 + len + 2..];
        }
        out
    }

    /// Fill every slot. Missing or unused values are errors so that template
    /// and code cannot drift apart silently.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String> {
        let slots = self.slots();
        for slot in &slots {
            if !values.iter().any(|(k, _)| k == slot) {
                return Err(Error::Template { name: self.name.clone(), message: format!("no value for slot `{slot}`") });
            }
        }
        for (k, _) in values {
            if !slots.iter().any(|s| s == k) {
                return Err(Error::Template { name: self.name.clone(), message: format!("template has no slot `{k}`") });
            }
        }
        let mut out = self.text.clone();
        for (k, v) in values {
            out = out.replace(&format!("{{{{{k}}}}}"), v);
        }
        Ok(out.trim_end().to_string())
    }
}

/// One template per stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub classify: PromptTemplate,
    pub reason: PromptTemplate,
    pub symbolic: PromptTemplate,
    pub correct: PromptTemplate,
    pub colocate: PromptTemplate,
    pub align: PromptTemplate,
}

impl PromptSet {
    pub fn from_texts(classify: &str, reason: &str, symbolic: &str, correct: &str, colocate: &str, align: &str) -> Self {
        Self {
            classify: PromptTemplate::new(STAGE_CLASSIFY, classify),
            reason: PromptTemplate::new(STAGE_REASON, reason),
            symbolic: PromptTemplate::new(STAGE_SYMBOLIC, symbolic),
            correct: PromptTemplate::new(STAGE_CORRECT, correct),
            colocate: PromptTemplate::new(STAGE_COLOCATE, colocate),
            align: PromptTemplate::new(STAGE_ALIGN, align),
        }
    }

    /// Reads `<stage>.txt` for every stage from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| crate::read_text(&dir.join(format!("{name}.txt")));
        Ok(Self::from_texts(
            &read(STAGE_CLASSIFY)?,
            &read(STAGE_REASON)?,
            &read(STAGE_SYMBOLIC)?,
            &read(STAGE_CORRECT)?,
            &read(STAGE_COLOCATE)?,
            &read(STAGE_ALIGN)?,
        ))
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        crate::data::prompts()
    }
}

/// Stage bypasses used for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub no_task_info: bool,
    pub no_language_reasoning: bool,
    pub no_logical_eval: bool,
    pub no_context: bool,
}

impl Ablation {
    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.no_task_info {
            parts.push("no_task_info");
        }
        if self.no_language_reasoning {
            parts.push("no_language_reasoning");
        }
        if self.no_logical_eval {
            parts.push("no_logical_eval");
        }
        if self.no_context {
            parts.push("no_context");
        }
        if parts.is_empty() {
            "base".into()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrectionStrategy {
    Lexical { threshold: f64 },
    Llm,
}

impl Default for CorrectionStrategy {
    fn default() -> Self {
        CorrectionStrategy::Lexical { threshold: DEFAULT_SIMILARITY_THRESHOLD }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub vote_n: usize,
    pub max_corrections: usize,
    pub max_replans: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub correction: CorrectionStrategy,
    pub ablation: Ablation,
    pub prompts: PromptSet,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vote_n: DEFAULT_VOTE_N,
            max_corrections: DEFAULT_MAX_CORRECTIONS,
            max_replans: DEFAULT_MAX_REPLANS,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            correction: CorrectionStrategy::default(),
            ablation: Ablation::default(),
            prompts: PromptSet::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vote_n == 0 {
            return Err(Error::Config("vote_n must be at least 1".into()));
        }
        Ok(())
    }

    fn request(&self, stage: &str, prompt: String, n: usize) -> CompletionRequest {
        CompletionRequest::new(stage, prompt)
            .with_n(n)
            .with_temperature(self.temperature)
            .with_max_tokens(self.max_tokens)
    }
}

/// One completion batch issued during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage_id: String,
    pub key: String,
    pub n: usize,
    pub prompt: String,
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub changes: Vec<LabelChange>,
    pub uncorrectable: Vec<Uncorrectable>,
}

/// One reasoning → symbolic → evaluation round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub round: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_plan: Option<LanguagePlan>,
    pub parse_issues: Vec<ParseIssue>,
    pub corrections: Vec<CorrectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<TaskPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Append-only log of a planning run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_type: Option<TaskType>,
    pub requests: Vec<StageRecord>,
    pub attempts: Vec<AttemptRecord>,
}

impl PipelineTrace {
    pub fn new(instruction: &Instruction) -> Self {
        Self { instruction: instruction.text().to_string(), ..Default::default() }
    }

    /// Copy with all timing fields zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.requests {
            r.elapsed_us = 0;
        }
        t
    }

    /// Issue a request and log it, including failures.
    pub fn complete(
        &mut self,
        provider: &dyn LlmProvider,
        request: &CompletionRequest,
    ) -> std::result::Result<Vec<String>, LlmError> {
        let started = Instant::now();
        let result = provider.complete(request);
        self.requests.push(StageRecord {
            stage_id: request.stage_id.clone(),
            key: request.key(),
            n: request.n,
            prompt: request.prompt.clone(),
            responses: result.clone().unwrap_or_default(),
            error: result.as_ref().err().map(ToString::to_string),
            elapsed_us: started.elapsed().as_micros() as u64,
        });
        result
    }
}

fn bullet_list<I: IntoIterator<Item = S>, S: AsRef<str>>(items: I) -> String {
    let lines: Vec<String> = items.into_iter().map(|s| format!("- {}", s.as_ref())).collect();
    if lines.is_empty() {
        "(none)".into()
    } else {
        lines.join("\n")
    }
}

fn known_actions(vocab: &Vocabulary) -> Vec<PrimitiveAction> {
    PrimitiveAction::ALL.into_iter().filter(|a| vocab.has_action(*a)).collect()
}

pub fn render_classify_prompt(instruction: &Instruction, cfg: &PipelineConfig) -> Result<String> {
    let types = bullet_list(TaskCategory::ALL.iter().map(|c| c.label()));
    cfg.prompts.classify.render(&[("task_types", &types), ("instruction", instruction.text())])
}

pub fn classify_task(instruction: &Instruction, provider: &dyn LlmProvider, cfg: &PipelineConfig, trace: &mut PipelineTrace) -> Result<TaskType> {
    let prompt = render_classify_prompt(instruction, cfg)?;
    let request = cfg.request(STAGE_CLASSIFY, prompt, cfg.vote_n);
    let responses = trace
        .complete(provider, &request)
        .map_err(|e| Error::ClassificationFailed(Box::new(e.into())))?;
    majority_vote(&responses, parse_task_label)
        .map_err(|e| Error::ClassificationFailed(Box::new(Error::NoValidVotes(e.0))))
}

pub fn render_reason_prompt(instruction: &Instruction, task_type: TaskType, info: &TaskInfo, vocab: &Vocabulary, cfg: &PipelineConfig) -> Result<String> {
    let actions = bullet_list(known_actions(vocab).iter().map(|a| a.phrase()));
    let description = if info.description.is_empty() { "(none)" } else { info.description.as_str() };
    cfg.prompts.reason.render(&[
        ("primitive_actions", &actions),
        ("task_type", &task_type.label()),
        ("task_description", description),
        ("task_rules", &bullet_list(&info.rules)),
        ("instruction", instruction.text()),
    ])
}

pub fn reason_language(
    instruction: &Instruction,
    task_type: TaskType,
    info: &TaskInfo,
    vocab: &Vocabulary,
    provider: &dyn LlmProvider,
    cfg: &PipelineConfig,
    trace: &mut PipelineTrace,
) -> Result<LanguagePlan> {
    let prompt = render_reason_prompt(instruction, task_type, info, vocab, cfg)?;
    let responses = trace.complete(provider, &cfg.request(STAGE_REASON, prompt, 1))?;
    parse_language_plan(&responses[0])
}

/// What the symbolic stage translates: a language plan, or the raw
/// instruction when language reasoning is bypassed.
#[derive(Debug, Clone, Copy)]
pub enum SymbolicInput<'a> {
    Language(&'a LanguagePlan),
    Instruction(&'a Instruction),
}

pub fn render_symbolic_prompt(input: SymbolicInput<'_>, request: &Instruction, task_type: TaskType, vocab: &Vocabulary, cfg: &PipelineConfig) -> Result<String> {
    let actions = bullet_list(known_actions(vocab).iter().map(|a| match a {
        PrimitiveAction::GotoLandmark => format!("{}(landmark)", a.ident()),
        _ => format!("{}(object)", a.ident()),
    }));
    let objects = vocab.objects.iter().cloned().collect::<Vec<_>>().join(", ");
    let landmarks = vocab.landmarks.iter().cloned().collect::<Vec<_>>().join(", ");
    let (heading, body) = match input {
        SymbolicInput::Language(lp) => ("Language plan", lp.render()),
        SymbolicInput::Instruction(i) => ("Instruction", i.text().to_string()),
    };
    cfg.prompts.symbolic.render(&[
        ("symbolic_actions", &actions),
        ("objects", &objects),
        ("landmarks", &landmarks),
        ("request", request.text()),
        ("task_type", &task_type.label()),
        ("plan_input_heading", heading),
        ("plan_input", &body),
    ])
}

/// Symbolic draft plus the parser's complaints.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicDraft {
    pub plan: TaskPlan,
    pub issues: Vec<ParseIssue>,
}

pub fn plan_symbolic(
    input: SymbolicInput<'_>,
    request: &Instruction,
    task_type: TaskType,
    vocab: &Vocabulary,
    provider: &dyn LlmProvider,
    cfg: &PipelineConfig,
    trace: &mut PipelineTrace,
) -> Result<SymbolicDraft> {
    let prompt = render_symbolic_prompt(input, request, task_type, vocab, cfg)?;
    let responses = trace.complete(provider, &cfg.request(STAGE_SYMBOLIC, prompt, 1))?;
    let draft = parse_symbolic_plan_text(&responses[0], vocab)?;
    Ok(SymbolicDraft { issues: draft.issues.clone(), plan: draft.into_plan(task_type) })
}

fn invalid_labels(report: &ValidationReport) -> Vec<String> {
    let mut labels: Vec<String> = report.unknown_labels.iter().map(|u| u.label.clone()).collect();
    labels.dedup();
    labels
}

/// Ask the model for replacements of the unknown labels. Only replacements
/// that are valid vocabulary items are applied.
pub fn llm_correct(
    plan: &TaskPlan,
    report: &ValidationReport,
    vocab: &Vocabulary,
    provider: &dyn LlmProvider,
    cfg: &PipelineConfig,
    trace: &mut PipelineTrace,
) -> Result<CorrectionOutcome> {
    let actions = vocab.actions.keys().cloned().collect::<Vec<_>>().join(", ");
    let objects = vocab.object_candidates(Some(PrimitiveAction::GotoLandmark)).into_iter().collect::<Vec<_>>().join(", ");
    let prompt = cfg.prompts.correct.render(&[
        ("actions", &actions),
        ("objects", &objects),
        ("plan", render_plan(plan).trim_end()),
        ("invalid_labels", &bullet_list(invalid_labels(report))),
    ])?;
    let responses = trace.complete(provider, &cfg.request(STAGE_CORRECT, prompt, 1))?;
    let mut replacements = BTreeMap::new();
    for line in responses[0].lines() {
        if let Some((from, to)) = line.trim().trim_start_matches("- ").split_once("->") {
            replacements.insert(normalize_label(from), normalize_label(to));
        }
    }
    let mut out = plan.clone();
    let mut changes = Vec::new();
    let mut uncorrectable = Vec::new();
    for unknown in &report.unknown_labels {
        let Some(step) = out.steps.iter_mut().find(|s| s.index == unknown.step_index) else { continue };
        let to = replacements.get(&normalize_label(&unknown.label));
        let applied = match (unknown.field, to) {
            (LabelField::Action, Some(to)) => match vocab.lookup_action(to) {
                Some(a) => {
                    step.action = ActionLabel::Known(a);
                    true
                }
                None => false,
            },
            (LabelField::Object, Some(to)) if vocab.accepts_object(step.action.known(), to) => {
                step.object_label = to.clone();
                true
            }
            _ => false,
        };
        if applied {
            changes.push(LabelChange {
                step_index: unknown.step_index,
                field: unknown.field,
                from: unknown.label.clone(),
                to: to.cloned().unwrap_or_default(),
                similarity: crate::constraints::label_similarity(&unknown.label, to.map(String::as_str).unwrap_or("")),
            });
        } else {
            uncorrectable.push(Uncorrectable {
                step_index: unknown.step_index,
                field: unknown.field,
                label: unknown.label.clone(),
                best_similarity: 0.0,
            });
        }
    }
    Ok(CorrectionOutcome { plan: out, changes, uncorrectable })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationOutcome {
    pub plan: TaskPlan,
    pub report: ValidationReport,
    pub attempts: usize,
    pub corrections: Vec<CorrectionRecord>,
}

/// Validate, then repair unknown labels up to `max_corrections` times.
/// Corrections never reorder steps, so sequence violations stay.
pub fn evaluate_and_correct(
    plan: TaskPlan,
    config: &ConstraintConfig,
    vocab: &Vocabulary,
    provider: Option<&dyn LlmProvider>,
    cfg: &PipelineConfig,
    trace: &mut PipelineTrace,
) -> Result<EvaluationOutcome> {
    let mut plan = plan;
    let mut report = validate_plan(&plan, config, vocab);
    let mut corrections = Vec::new();
    let mut attempts = 0;
    while !report.unknown_labels.is_empty() && attempts < cfg.max_corrections {
        let outcome = match (cfg.correction, provider) {
            (CorrectionStrategy::Llm, Some(p)) => llm_correct(&plan, &report, vocab, p, cfg, trace)?,
            (CorrectionStrategy::Lexical { threshold }, _) => lexical_correct(&plan, vocab, threshold),
            (CorrectionStrategy::Llm, None) => lexical_correct(&plan, vocab, DEFAULT_SIMILARITY_THRESHOLD),
        };
        attempts += 1;
        let progressed = !outcome.changes.is_empty();
        corrections.push(CorrectionRecord { changes: outcome.changes, uncorrectable: outcome.uncorrectable });
        if !progressed {
            break;
        }
        plan = outcome.plan;
        report = validate_plan(&plan, config, vocab);
    }
    Ok(EvaluationOutcome { plan, report, attempts, corrections })
}

/// Read-only inputs shared by planning runs.
#[derive(Debug, Clone, Copy)]
pub struct Planner<'a> {
    pub registry: &'a TaskInfoRegistry,
    pub profiles: &'a ProfileRegistry,
    pub vocab: &'a Vocabulary,
    pub config: &'a PipelineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: TaskPlan,
    pub report: ValidationReport,
    pub trace: PipelineTrace,
}

impl<'a> Planner<'a> {
    pub fn new(domain: &'a crate::data::Domain, config: &'a PipelineConfig) -> Self {
        Self { registry: &domain.task_info, profiles: &domain.profiles, vocab: &domain.vocabulary, config }
    }

    /// Full planning run. Classification happens once; each round restarts
    /// at language reasoning with the same task info.
    pub fn plan_full(&self, instruction: &Instruction, provider: &dyn LlmProvider) -> Result<PlanOutcome> {
        let cfg = self.config;
        cfg.validate()?;
        let mut trace = PipelineTrace::new(instruction);
        let task_type = classify_task(instruction, provider, cfg, &mut trace)?;
        trace.task_type = Some(task_type);

        let mut info = retrieve_task_info(task_type, self.registry);
        let profile = self
            .profiles
            .get(&info.constraint_profile_id)
            .ok_or_else(|| Error::Registry(format!("unknown constraint profile `{}`", info.constraint_profile_id)))?;
        if cfg.ablation.no_task_info {
            info = TaskInfo::empty(&info.constraint_profile_id);
        }

        let rounds = cfg.max_replans + 1;
        let mut last_report = None;
        for round in 1..=rounds {
            let mut attempt = AttemptRecord { round, ..Default::default() };
            let result = self.round(instruction, task_type, &info, profile, provider, &mut trace, &mut attempt);
            match result {
                Ok(Some(outcome)) => {
                    let mut plan = outcome.plan;
                    plan.provenance.round = round;
                    plan.provenance.corrections = outcome.attempts;
                    attempt.plan = Some(plan.clone());
                    attempt.report = Some(outcome.report.clone());
                    let valid = outcome.report.is_valid() || cfg.ablation.no_logical_eval;
                    trace.attempts.push(attempt);
                    if valid {
                        return Ok(PlanOutcome { plan, report: outcome.report, trace });
                    }
                    last_report = trace.attempts.last().and_then(|a| a.report.clone());
                }
                Ok(None) => trace.attempts.push(attempt),
                Err(e) => {
                    trace.attempts.push(attempt);
                    return Err(e);
                }
            }
        }
        let report = last_report.unwrap_or_else(|| ValidationReport {
            profile_id: profile.profile_id.clone(),
            violations: Vec::new(),
            unknown_labels: Vec::new(),
            verdict: Verdict::Invalid,
        });
        Err(Error::PlanningExhausted { rounds, report: Box::new(report), trace: Box::new(trace) })
    }

    /// One round. `Ok(None)` means the model output was unusable and the
    /// round counts as failed; LLM transport errors abort the run.
    #[allow(clippy::too_many_arguments)]
    fn round(
        &self,
        instruction: &Instruction,
        task_type: TaskType,
        info: &TaskInfo,
        profile: &ConstraintConfig,
        provider: &dyn LlmProvider,
        trace: &mut PipelineTrace,
        attempt: &mut AttemptRecord,
    ) -> Result<Option<EvaluationOutcome>> {
        let cfg = self.config;
        let language;
        let input = if cfg.ablation.no_language_reasoning {
            SymbolicInput::Instruction(instruction)
        } else {
            match reason_language(instruction, task_type, info, self.vocab, provider, cfg, trace) {
                Ok(lp) => {
                    attempt.language_plan = Some(lp.clone());
                    language = lp;
                    SymbolicInput::Language(&language)
                }
                Err(e @ Error::EmptyReasoning) => {
                    attempt.failure = Some(e.to_string());
                    return Ok(None);
                }
                Err(e) => return Err(e),
            }
        };
        let draft = match plan_symbolic(input, instruction, task_type, self.vocab, provider, cfg, trace) {
            Ok(d) => d,
            Err(Error::EmptyOutput { issues }) => {
                attempt.failure = Some("symbolic output had no well-formed steps".into());
                attempt.parse_issues = issues;
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        attempt.parse_issues = draft.issues;
        if cfg.ablation.no_logical_eval {
            let report = validate_plan(&draft.plan, profile, self.vocab);
            return Ok(Some(EvaluationOutcome { plan: draft.plan, report, attempts: 0, corrections: Vec::new() }));
        }
        let outcome = evaluate_and_correct(draft.plan, profile, self.vocab, Some(provider), cfg, trace)?;
        attempt.corrections = outcome.corrections.clone();
        Ok(Some(outcome))
    }
}
