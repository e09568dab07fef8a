//! Operational-constraint configs, code-based plan validation and lexical
//! correction of unknown labels.
//!
//! Config grammar (one directive per line, `#` starts a comment):
//!
//! ```text
//! profile alfred
//! state hand : hand
//! state open : bool
//! action pick_up requires hand == empty sets hand = target
//! action slice requires hand == knife, !sliced sets sliced
//! forbid pick_up then pick_up
//! fixed pick_up -> put
//! pair toggle_on ~ toggle_off exempt cooker
//! ```
//!
//! Conditions: `none`, `never`, `<hand> == empty|target|<label>`,
//! `<hand> != empty|target`, `<flag>`, `!<flag>`. Effects: `none`,
//! `<hand> = empty|target`, `<flag>`, `!<flag>`. Flags are tracked per object
//! label and start out false; the hand starts empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{normalize_label, ActionLabel, PrimitiveAction, TaskPlan, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateType {
    Hand,
    Bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandValue {
    Empty,
    Target,
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Always,
    Never,
    HandIs { var: String, value: HandValue },
    HandIsNot { var: String, value: HandValue },
    Flag { var: String, value: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    SetHand { var: String, value: HandValue },
    SetFlag { var: String, value: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub requires: Vec<Condition>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    Forbid { pattern: Vec<PrimitiveAction> },
    Fixed { trigger: PrimitiveAction, required: PrimitiveAction },
    Pair { opener: PrimitiveAction, closer: PrimitiveAction, exempt: BTreeSet<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRule {
    pub id: String,
    pub kind: RuleKind,
}

impl SequenceRule {
    fn derive_id(kind: &RuleKind) -> String {
        match kind {
            RuleKind::Forbid { pattern } => format!(
                "forbid:{}",
                pattern.iter().map(|a| a.ident()).collect::<Vec<_>>().join(">")
            ),
            RuleKind::Fixed { trigger, required } => format!("fixed:{trigger}->{required}"),
            RuleKind::Pair { opener, closer, .. } => format!("pair:{opener}~{closer}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub profile_id: String,
    pub state_schema: BTreeMap<String, StateType>,
    pub action_specs: BTreeMap<PrimitiveAction, ActionSpec>,
    pub sequence_rules: Vec<SequenceRule>,
}

impl ConstraintConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::read_text(path)?;
        let mut cfg = parse_constraint_config(&text)?;
        if cfg.profile_id.is_empty() {
            cfg.profile_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        }
        Ok(cfg)
    }

    pub fn spec(&self, action: PrimitiveAction) -> &ActionSpec {
        &self.action_specs[&action]
    }

    /// Whether the action is usable at all under this profile.
    pub fn allows(&self, action: PrimitiveAction) -> bool {
        !self.spec(action).requires.contains(&Condition::Never)
    }
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, message: message.into() }
}

fn parse_action(line: usize, name: &str) -> Result<PrimitiveAction> {
    let name = name.trim().trim_end_matches("()");
    PrimitiveAction::from_ident(name).ok_or_else(|| Error::UnknownAction { line, name: name.to_string() })
}

fn hand_value(raw: &str) -> HandValue {
    match raw {
        "empty" => HandValue::Empty,
        "target" => HandValue::Target,
        other => HandValue::Label(normalize_label(other)),
    }
}

struct Parser {
    schema: BTreeMap<String, StateType>,
}

impl Parser {
    fn var(&self, line: usize, name: &str, ty: StateType) -> Result<String> {
        match self.schema.get(name) {
            Some(t) if *t == ty => Ok(name.to_string()),
            Some(t) => Err(syntax(line, format!("state `{name}` is {t:?}, not {ty:?}"))),
            None => Err(syntax(line, format!("undeclared state `{name}`"))),
        }
    }

    fn condition(&self, line: usize, raw: &str) -> Result<Option<Condition>> {
        let raw = raw.trim();
        match raw {
            "none" => return Ok(None),
            "never" => return Ok(Some(Condition::Never)),
            "" => return Err(syntax(line, "empty condition")),
            _ => {}
        }
        if let Some((lhs, rhs)) = raw.split_once("!=") {
            let var = self.var(line, lhs.trim(), StateType::Hand)?;
            let value = hand_value(rhs.trim());
            if matches!(value, HandValue::Label(_)) {
                return Err(syntax(line, "`!=` accepts only `empty` or `target`"));
            }
            return Ok(Some(Condition::HandIsNot { var, value }));
        }
        if let Some((lhs, rhs)) = raw.split_once("==") {
            let var = self.var(line, lhs.trim(), StateType::Hand)?;
            return Ok(Some(Condition::HandIs { var, value: hand_value(rhs.trim()) }));
        }
        let (name, value) = match raw.strip_prefix('!') {
            Some(rest) => (rest.trim(), false),
            None => (raw, true),
        };
        let var = self.var(line, name, StateType::Bool)?;
        Ok(Some(Condition::Flag { var, value }))
    }

    fn effect(&self, line: usize, raw: &str) -> Result<Option<Effect>> {
        let raw = raw.trim();
        if raw == "none" {
            return Ok(None);
        }
        if let Some((lhs, rhs)) = raw.split_once('=') {
            let var = self.var(line, lhs.trim(), StateType::Hand)?;
            let value = match hand_value(rhs.trim()) {
                HandValue::Label(l) => return Err(syntax(line, format!("cannot assign label `{l}` to hand"))),
                v => v,
            };
            return Ok(Some(Effect::SetHand { var, value }));
        }
        let (name, value) = match raw.strip_prefix('!') {
            Some(rest) => (rest.trim(), false),
            None => (raw, true),
        };
        let var = self.var(line, name, StateType::Bool)?;
        Ok(Some(Effect::SetFlag { var, value }))
    }
}

/// Parse a constraint config. The profile id comes from a `profile` line and
/// is left empty when absent.
pub fn parse_constraint_config(text: &str) -> Result<ConstraintConfig> {
    let mut parser = Parser { schema: BTreeMap::new() };
    let mut profile_id = String::new();
    let mut specs: BTreeMap<PrimitiveAction, ActionSpec> = BTreeMap::new();
    let mut rules: Vec<SequenceRule> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        match keyword {
            "profile" => {
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(syntax(line, "expected `profile <id>`"));
                }
                profile_id = rest.to_string();
            }
            "state" => {
                let (name, ty) = rest
                    .split_once(':')
                    .ok_or_else(|| syntax(line, "expected `state <var> : <type>`"))?;
                let ty = match ty.trim() {
                    "hand" => StateType::Hand,
                    "bool" => StateType::Bool,
                    other => return Err(syntax(line, format!("unknown state type `{other}`"))),
                };
                let name = name.trim();
                if name.is_empty() || parser.schema.insert(name.to_string(), ty).is_some() {
                    return Err(syntax(line, format!("bad or repeated state `{name}`")));
                }
            }
            "action" => {
                let (name, rest) = rest
                    .split_once(" requires ")
                    .ok_or_else(|| syntax(line, "expected `action <name> requires … sets …`"))?;
                let action = parse_action(line, name)?;
                let (conds, effects) = rest
                    .split_once(" sets ")
                    .ok_or_else(|| syntax(line, "missing `sets` clause"))?;
                let requires = conds
                    .split(',')
                    .map(|c| parser.condition(line, c))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect();
                let effects = effects
                    .split(',')
                    .map(|e| parser.effect(line, e))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect();
                if specs.insert(action, ActionSpec { requires, effects }).is_some() {
                    return Err(Error::DuplicateRule { line, id: format!("action:{action}") });
                }
            }
            "forbid" => {
                let pattern = rest
                    .split(" then ")
                    .map(|a| parse_action(line, a))
                    .collect::<Result<Vec<_>>>()?;
                if pattern.is_empty() {
                    return Err(syntax(line, "empty forbid pattern"));
                }
                rules.push(new_rule(line, &rules, RuleKind::Forbid { pattern })?);
            }
            "fixed" => {
                let (a, b) = rest.split_once("->").ok_or_else(|| syntax(line, "expected `fixed <a> -> <b>`"))?;
                let trigger = parse_action(line, a)?;
                let required = parse_action(line, b)?;
                if trigger == required {
                    return Err(syntax(line, "fixed trigger and required action must differ"));
                }
                rules.push(new_rule(line, &rules, RuleKind::Fixed { trigger, required })?);
            }
            "pair" => {
                let (pair, exempt) = match rest.split_once(" exempt ") {
                    Some((p, e)) => (p, e.split(',').map(normalize_label).filter(|s| !s.is_empty()).collect()),
                    None => (rest, BTreeSet::new()),
                };
                let (a, b) = pair.split_once('~').ok_or_else(|| syntax(line, "expected `pair <a> ~ <b>`"))?;
                let opener = parse_action(line, a)?;
                let closer = parse_action(line, b)?;
                if opener == closer {
                    return Err(syntax(line, "pair actions must differ"));
                }
                rules.push(new_rule(line, &rules, RuleKind::Pair { opener, closer, exempt })?);
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    let missing: Vec<_> = PrimitiveAction::ALL
        .into_iter()
        .filter(|a| !specs.contains_key(a))
        .map(|a| a.ident())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("no action spec for: {}", missing.join(", "))));
    }
    Ok(ConstraintConfig { profile_id, state_schema: parser.schema, action_specs: specs, sequence_rules: rules })
}

fn new_rule(line: usize, existing: &[SequenceRule], kind: RuleKind) -> Result<SequenceRule> {
    let id = SequenceRule::derive_id(&kind);
    if existing.iter().any(|r| r.id == id) {
        return Err(Error::DuplicateRule { line, id });
    }
    Ok(SequenceRule { id, kind })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Precondition,
    Forbid,
    Fixed,
    Pair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub step_index: usize,
    pub rule_id: String,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelField {
    Action,
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownLabel {
    pub step_index: usize,
    pub field: LabelField,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub profile_id: String,
    pub violations: Vec<Violation>,
    pub unknown_labels: Vec<UnknownLabel>,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }
}

/// Abstract state replayed during validation.
#[derive(Debug, Clone, Default)]
struct AbstractState {
    hands: BTreeMap<String, Option<String>>,
    flags: BTreeMap<(String, String), bool>,
}

impl AbstractState {
    fn hand(&self, var: &str) -> Option<&str> {
        self.hands.get(var).and_then(|h| h.as_deref())
    }

    fn flag(&self, var: &str, label: &str) -> bool {
        self.flags.get(&(var.to_string(), label.to_string())).copied().unwrap_or(false)
    }

    fn check(&self, cond: &Condition, target: &str) -> std::result::Result<(), String> {
        let describe = |h: Option<&str>| h.map(|l| format!("holds {l}")).unwrap_or_else(|| "is empty".into());
        match cond {
            Condition::Always => Ok(()),
            Condition::Never => Err("action is not available in this profile".into()),
            Condition::HandIs { var, value } => {
                let h = self.hand(var);
                let ok = match value {
                    HandValue::Empty => h.is_none(),
                    HandValue::Target => h == Some(target),
                    HandValue::Label(l) => h == Some(l.as_str()),
                };
                if ok {
                    Ok(())
                } else {
                    let want = match value {
                        HandValue::Empty => "empty".to_string(),
                        HandValue::Target => target.to_string(),
                        HandValue::Label(l) => l.clone(),
                    };
                    Err(format!("requires {var} == {want}, but {var} {}", describe(h)))
                }
            }
            Condition::HandIsNot { var, value } => {
                let h = self.hand(var);
                let ok = match value {
                    HandValue::Empty => h.is_some(),
                    HandValue::Target => h != Some(target),
                    HandValue::Label(l) => h != Some(l.as_str()),
                };
                if ok {
                    Ok(())
                } else {
                    Err(format!("requires {var} != {}, but {var} {}", match value {
                        HandValue::Empty => "empty",
                        HandValue::Target => target,
                        HandValue::Label(l) => l,
                    }, describe(h)))
                }
            }
            Condition::Flag { var, value } => {
                if self.flag(var, target) == *value {
                    Ok(())
                } else {
                    Err(format!("requires {}{var}({target})", if *value { "" } else { "!" }))
                }
            }
        }
    }

    fn apply(&mut self, effect: &Effect, target: &str) {
        match effect {
            Effect::SetHand { var, value } => {
                let v = match value {
                    HandValue::Empty => None,
                    HandValue::Target => Some(target.to_string()),
                    HandValue::Label(l) => Some(l.clone()),
                };
                self.hands.insert(var.clone(), v);
            }
            Effect::SetFlag { var, value } => {
                self.flags.insert((var.clone(), target.to_string()), *value);
            }
        }
    }
}

/// Code-based evaluation of a plan against a constraint profile.
///
/// Contextual guidance is ignored. Goto steps have no preconditions and are
/// invisible to sequence rules.
pub fn validate_plan(plan: &TaskPlan, config: &ConstraintConfig, vocab: &Vocabulary) -> ValidationReport {
    let mut violations = Vec::new();
    let mut unknown_labels = Vec::new();
    let mut state = AbstractState::default();
    let mut interactions: Vec<(usize, PrimitiveAction, &str)> = Vec::new();

    for step in &plan.steps {
        let action = match &step.action {
            ActionLabel::Known(a) => *a,
            ActionLabel::Unknown(label) => {
                unknown_labels.push(UnknownLabel {
                    step_index: step.index,
                    field: LabelField::Action,
                    label: label.clone(),
                });
                if !vocab.accepts_object(None, &step.object_label) {
                    unknown_labels.push(UnknownLabel {
                        step_index: step.index,
                        field: LabelField::Object,
                        label: step.object_label.clone(),
                    });
                }
                continue;
            }
        };
        if !vocab.accepts_object(Some(action), &step.object_label) {
            unknown_labels.push(UnknownLabel {
                step_index: step.index,
                field: LabelField::Object,
                label: step.object_label.clone(),
            });
        }
        if !action.is_interaction() {
            continue;
        }
        let target = step.object_label.as_str();
        let spec = config.spec(action);
        if let Some(reason) = spec.requires.iter().find_map(|c| state.check(c, target).err()) {
            violations.push(Violation {
                step_index: step.index,
                rule_id: format!("action:{action}"),
                kind: ViolationKind::Precondition,
                message: format!("{action}({target}) {reason}"),
            });
        }
        for e in &spec.effects {
            state.apply(e, target);
        }
        interactions.push((step.index, action, target));
    }

    for rule in &config.sequence_rules {
        check_rule(rule, &interactions, &mut violations);
    }
    violations.sort_by_key(|v| v.step_index);

    let verdict = if violations.is_empty() && unknown_labels.is_empty() { Verdict::Valid } else { Verdict::Invalid };
    ValidationReport { profile_id: config.profile_id.clone(), violations, unknown_labels, verdict }
}

fn check_rule(rule: &SequenceRule, seq: &[(usize, PrimitiveAction, &str)], out: &mut Vec<Violation>) {
    match &rule.kind {
        RuleKind::Forbid { pattern } => {
            if pattern.len() > seq.len() {
                return;
            }
            for w in seq.windows(pattern.len()) {
                if w.iter().map(|s| s.1).eq(pattern.iter().copied()) {
                    let last = w.last().unwrap();
                    out.push(Violation {
                        step_index: last.0,
                        rule_id: rule.id.clone(),
                        kind: ViolationKind::Forbid,
                        message: format!(
                            "forbidden sequence {}",
                            pattern.iter().map(|a| a.ident()).collect::<Vec<_>>().join(" then ")
                        ),
                    });
                }
            }
        }
        RuleKind::Fixed { trigger, required } => {
            for (i, (idx, action, target)) in seq.iter().enumerate() {
                if action != trigger {
                    continue;
                }
                match seq.get(i + 1) {
                    Some((next_idx, next, next_target)) if next != required => out.push(Violation {
                        step_index: *next_idx,
                        rule_id: rule.id.clone(),
                        kind: ViolationKind::Fixed,
                        message: format!(
                            "{trigger}({target}) must be followed by {required}, found {next}({next_target})"
                        ),
                    }),
                    Some(_) => {}
                    None => out.push(Violation {
                        step_index: *idx,
                        rule_id: rule.id.clone(),
                        kind: ViolationKind::Fixed,
                        message: format!("{trigger}({target}) must be followed by {required}, plan ends"),
                    }),
                }
            }
        }
        RuleKind::Pair { opener, closer, exempt } => {
            let mut open: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (idx, action, target) in seq {
                if action == opener && !exempt.contains(*target) {
                    open.entry(target).or_default().push(*idx);
                } else if action == closer {
                    if let Some(stack) = open.get_mut(target) {
                        if !stack.is_empty() {
                            stack.remove(0);
                        }
                    }
                }
            }
            for (target, idxs) in open {
                for idx in idxs {
                    out.push(Violation {
                        step_index: idx,
                        rule_id: rule.id.clone(),
                        kind: ViolationKind::Pair,
                        message: format!("{opener}({target}) is never followed by {closer}({target})"),
                    });
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelChange {
    pub step_index: usize,
    pub field: LabelField,
    pub from: String,
    pub to: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uncorrectable {
    pub step_index: usize,
    pub field: LabelField,
    pub label: String,
    pub best_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOutcome {
    pub plan: TaskPlan,
    pub changes: Vec<LabelChange>,
    pub uncorrectable: Vec<Uncorrectable>,
}

/// Replaces unknown labels in a plan. Implementations must only introduce
/// labels from the vocabulary.
pub trait LabelCorrector: Send + Sync {
    fn correct(&self, plan: &TaskPlan, vocab: &Vocabulary) -> Result<CorrectionOutcome>;
}

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.5;

/// `1 - levenshtein / max_len` over lower-cased labels.
pub fn label_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&a.to_lowercase(), &b.to_lowercase())
}

fn best_match<'a>(label: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<(&'a str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for cand in candidates {
        let sim = label_similarity(label, cand);
        best = match best {
            Some((b, s)) if s > sim || (s == sim && b <= cand) => Some((b, s)),
            _ => Some((cand, sim)),
        };
    }
    best
}

/// Replace each unknown label with its most similar vocabulary item when the
/// similarity reaches `threshold`. Ties go to the lexicographically smallest
/// candidate.
pub fn lexical_correct(plan: &TaskPlan, vocab: &Vocabulary, threshold: f64) -> CorrectionOutcome {
    let mut out = plan.clone();
    let mut changes = Vec::new();
    let mut uncorrectable = Vec::new();
    for step in &mut out.steps {
        if let ActionLabel::Unknown(label) = &step.action {
            match best_match(label, vocab.actions.keys().map(String::as_str)) {
                Some((cand, sim)) if sim >= threshold => {
                    changes.push(LabelChange {
                        step_index: step.index,
                        field: LabelField::Action,
                        from: label.clone(),
                        to: cand.to_string(),
                        similarity: sim,
                    });
                    step.action = ActionLabel::Known(vocab.actions[cand]);
                }
                best => uncorrectable.push(Uncorrectable {
                    step_index: step.index,
                    field: LabelField::Action,
                    label: label.clone(),
                    best_similarity: best.map(|b| b.1).unwrap_or(0.0),
                }),
            }
        }
        let action = step.action.known();
        if !vocab.accepts_object(action, &step.object_label) {
            match best_match(&step.object_label, vocab.object_candidates(action)) {
                Some((cand, sim)) if sim >= threshold => {
                    changes.push(LabelChange {
                        step_index: step.index,
                        field: LabelField::Object,
                        from: step.object_label.clone(),
                        to: cand.to_string(),
                        similarity: sim,
                    });
                    step.object_label = cand.to_string();
                }
                best => uncorrectable.push(Uncorrectable {
                    step_index: step.index,
                    field: LabelField::Object,
                    label: step.object_label.clone(),
                    best_similarity: best.map(|b| b.1).unwrap_or(0.0),
                }),
            }
        }
    }
    CorrectionOutcome { plan: out, changes, uncorrectable }
}

#[derive(Debug, Clone, Copy)]
pub struct LexicalCorrector {
    pub threshold: f64,
}

impl Default for LexicalCorrector {
    fn default() -> Self {
        Self { threshold: DEFAULT_SIMILARITY_THRESHOLD }
    }
}

impl LabelCorrector for LexicalCorrector {
    fn correct(&self, plan: &TaskPlan, vocab: &Vocabulary) -> Result<CorrectionOutcome> {
        Ok(lexical_correct(plan, vocab, self.threshold))
    }
}

/// Loaded constraint profiles keyed by profile id.
#[derive(Debug, Clone, Default)]
pub struct ProfileRegistry {
    profiles: BTreeMap<String, ConstraintConfig>,
}

impl ProfileRegistry {
    pub fn new(configs: impl IntoIterator<Item = ConstraintConfig>) -> Self {
        Self { profiles: configs.into_iter().map(|c| (c.profile_id.clone(), c)).collect() }
    }

    pub fn get(&self, id: &str) -> Option<&ConstraintConfig> {
        self.profiles.get(id)
    }

    pub fn insert(&mut self, config: ConstraintConfig) {
        self.profiles.insert(config.profile_id.clone(), config);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
        })
    }
}
