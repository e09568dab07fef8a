//! Plan vocabulary and the text formats exchanged with the planning stages.
//!
//! A symbolic plan is a numbered list of `action(object)` lines with an
//! optional contextual-guidance suffix:
//!
//! ```text
//! 1. open(drawer)
//! 2. pick_up(apple)
//! 3. put(cabinet) | context: "the cabinet beneath the coffee machine"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed set of primitive robot actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveAction {
    PickUp,
    Put,
    ToggleOn,
    ToggleOff,
    Open,
    Close,
    Slice,
    #[serde(rename = "goto")]
    GotoLandmark,
}

impl PrimitiveAction {
    pub const ALL: [PrimitiveAction; 8] = [
        PrimitiveAction::PickUp,
        PrimitiveAction::Put,
        PrimitiveAction::ToggleOn,
        PrimitiveAction::ToggleOff,
        PrimitiveAction::Open,
        PrimitiveAction::Close,
        PrimitiveAction::Slice,
        PrimitiveAction::GotoLandmark,
    ];

    /// Identifier used in plan text and constraint configs.
    pub fn ident(self) -> &'static str {
        match self {
            PrimitiveAction::PickUp => "pick_up",
            PrimitiveAction::Put => "put",
            PrimitiveAction::ToggleOn => "toggle_on",
            PrimitiveAction::ToggleOff => "toggle_off",
            PrimitiveAction::Open => "open",
            PrimitiveAction::Close => "close",
            PrimitiveAction::Slice => "slice",
            PrimitiveAction::GotoLandmark => "goto",
        }
    }

    pub fn from_ident(s: &str) -> Option<Self> {
        let norm = normalize_label(s);
        Self::ALL.into_iter().find(|a| a.ident() == norm)
    }

    /// Natural-language phrasing used in the reasoning prompt.
    pub fn phrase(self) -> &'static str {
        match self {
            PrimitiveAction::PickUp => "pick up",
            PrimitiveAction::Put => "put",
            PrimitiveAction::ToggleOn => "toggle on",
            PrimitiveAction::ToggleOff => "toggle off",
            PrimitiveAction::Open => "open",
            PrimitiveAction::Close => "close",
            PrimitiveAction::Slice => "slice",
            PrimitiveAction::GotoLandmark => "go to a landmark",
        }
    }

    pub fn is_interaction(self) -> bool {
        self != PrimitiveAction::GotoLandmark
    }
}

impl fmt::Display for PrimitiveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ident())
    }
}

/// The seven task categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    PickPlace,
    StackPlace,
    CleanPlace,
    CoolPlace,
    HeatPlace,
    PickTwoPlace,
    ExamineInLight,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 7] = [
        TaskCategory::PickPlace,
        TaskCategory::StackPlace,
        TaskCategory::CleanPlace,
        TaskCategory::CoolPlace,
        TaskCategory::HeatPlace,
        TaskCategory::PickTwoPlace,
        TaskCategory::ExamineInLight,
    ];

    /// Human-readable label, as offered to the classification stage.
    pub fn label(self) -> &'static str {
        match self {
            TaskCategory::PickPlace => "Pick & Place",
            TaskCategory::StackPlace => "Stack & Place",
            TaskCategory::CleanPlace => "Clean & Place",
            TaskCategory::CoolPlace => "Cool & Place",
            TaskCategory::HeatPlace => "Heat & Place",
            TaskCategory::PickTwoPlace => "Pick Two & Place",
            TaskCategory::ExamineInLight => "Examine in Light",
        }
    }

    /// Snake-case key used in registry files and CLI arguments.
    pub fn key(self) -> &'static str {
        match self {
            TaskCategory::PickPlace => "pick_place",
            TaskCategory::StackPlace => "stack_place",
            TaskCategory::CleanPlace => "clean_place",
            TaskCategory::CoolPlace => "cool_place",
            TaskCategory::HeatPlace => "heat_place",
            TaskCategory::PickTwoPlace => "pick_two_place",
            TaskCategory::ExamineInLight => "examine_in_light",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.key() == key)
    }
}

/// Task category plus the orthogonal slicing flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskType {
    pub category: TaskCategory,
    pub slicing: bool,
}

impl TaskType {
    pub fn new(category: TaskCategory, slicing: bool) -> Self {
        Self { category, slicing }
    }

    /// All 14 category/slicing combinations.
    pub fn all() -> impl Iterator<Item = TaskType> {
        TaskCategory::ALL
            .into_iter()
            .flat_map(|c| [TaskType::new(c, false), TaskType::new(c, true)])
    }

    /// Registry key: `<category>` or `<category>+slicing`.
    pub fn key(&self) -> String {
        if self.slicing {
            format!("{}+slicing", self.category.key())
        } else {
            self.category.key().to_string()
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        match key.strip_suffix("+slicing") {
            Some(base) => TaskCategory::from_key(base).map(|c| TaskType::new(c, true)),
            None => TaskCategory::from_key(key).map(|c| TaskType::new(c, false)),
        }
    }

    pub fn label(&self) -> String {
        if self.slicing {
            format!("{} (with slicing)", self.category.label())
        } else {
            self.category.label().to_string()
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn label_words(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parse a classification response into a task type.
///
/// Matching ignores case and punctuation; the whole response must name one
/// category, optionally followed by `with slicing`.
pub fn parse_task_label(raw: &str) -> Result<TaskType> {
    let words = label_words(raw);
    TaskType::all()
        .find(|t| label_words(&t.label()) == words)
        .ok_or_else(|| Error::UnrecognizedLabel(raw.trim().to_string()))
}

/// Free-text instruction given to the planner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Instruction(String);

impl Instruction {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyInstruction);
        }
        Ok(Self(text))
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Instruction {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Instruction::new(value)
    }
}

impl From<Instruction> for String {
    fn from(value: Instruction) -> Self {
        value.0
    }
}

/// Lower-cases a label and treats spaces and underscores as the same
/// separator, so `Coffee Machine` and `coffee_machine` compare equal.
pub fn normalize_label(raw: &str) -> String {
    raw.trim()
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

/// Valid action surface forms, object labels and landmark labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub actions: BTreeMap<String, PrimitiveAction>,
    pub objects: BTreeSet<String>,
    pub landmarks: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<A, O, L>(actions: A, objects: O, landmarks: L) -> Result<Self>
    where
        A: IntoIterator<Item = (String, PrimitiveAction)>,
        O: IntoIterator<Item = String>,
        L: IntoIterator<Item = String>,
    {
        let mut map = BTreeMap::new();
        for (surface, action) in actions {
            let key = normalize_label(&surface);
            if let Some(prev) = map.insert(key.clone(), action) {
                if prev != action {
                    return Err(Error::Vocabulary(format!(
                        "surface form `{key}` maps to both {prev} and {action}"
                    )));
                }
            }
        }
        Ok(Self {
            actions: map,
            objects: objects.into_iter().map(|o| normalize_label(&o)).collect(),
            landmarks: landmarks.into_iter().map(|o| normalize_label(&o)).collect(),
        })
    }

    /// Vocabulary whose action surface forms are the canonical identifiers
    /// of every primitive.
    pub fn with_all_actions<O, L>(objects: O, landmarks: L) -> Self
    where
        O: IntoIterator<Item = String>,
        L: IntoIterator<Item = String>,
    {
        Self::new(
            PrimitiveAction::ALL.iter().map(|a| (a.ident().to_string(), *a)),
            objects,
            landmarks,
        )
        .expect("canonical identifiers are distinct")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vocabulary = serde_json::from_str(text)?;
        Self::new(raw.actions, raw.objects, raw.landmarks)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::read_text(path)?)
    }

    pub fn lookup_action(&self, surface: &str) -> Option<PrimitiveAction> {
        self.actions.get(&normalize_label(surface)).copied()
    }

    pub fn has_action(&self, action: PrimitiveAction) -> bool {
        self.actions.values().any(|a| *a == action)
    }

    /// Whether `label` is a valid target for `action`. Goto targets may be
    /// landmarks or objects.
    pub fn accepts_object(&self, action: Option<PrimitiveAction>, label: &str) -> bool {
        let label = normalize_label(label);
        match action {
            Some(PrimitiveAction::GotoLandmark) => {
                self.landmarks.contains(&label) || self.objects.contains(&label)
            }
            _ => self.objects.contains(&label),
        }
    }

    /// Candidate labels for the object slot of `action`.
    pub fn object_candidates(&self, action: Option<PrimitiveAction>) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.objects.iter().map(String::as_str).collect();
        if action == Some(PrimitiveAction::GotoLandmark) {
            out.extend(self.landmarks.iter().map(String::as_str));
        }
        out
    }
}

/// Action slot of a symbolic step: a known primitive or a label that did not
/// resolve against the vocabulary and awaits correction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionLabel {
    Known(PrimitiveAction),
    Unknown(String),
}

impl ActionLabel {
    pub fn known(&self) -> Option<PrimitiveAction> {
        match self {
            ActionLabel::Known(a) => Some(*a),
            ActionLabel::Unknown(_) => None,
        }
    }

    pub fn surface(&self) -> &str {
        match self {
            ActionLabel::Known(a) => a.ident(),
            ActionLabel::Unknown(s) => s,
        }
    }
}

impl From<PrimitiveAction> for ActionLabel {
    fn from(value: PrimitiveAction) -> Self {
        ActionLabel::Known(value)
    }
}

/// One step `(action, object, context)` of a symbolic plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicStep {
    pub index: usize,
    pub action: ActionLabel,
    pub object_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl SymbolicStep {
    pub fn new(
        index: usize,
        action: impl Into<ActionLabel>,
        object_label: &str,
        context: Option<&str>,
    ) -> Self {
        Self {
            index,
            action: action.into(),
            object_label: normalize_label(object_label),
            context: context.map(str::trim).filter(|c| !c.is_empty()).map(String::from),
        }
    }

    pub fn primitive(&self) -> Option<PrimitiveAction> {
        self.action.known()
    }

    pub fn is_goto(&self) -> bool {
        self.primitive() == Some(PrimitiveAction::GotoLandmark)
    }
}

/// Attempt counters recorded by the pipeline for a finished plan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub round: usize,
    pub corrections: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub steps: Vec<SymbolicStep>,
    pub task_type: TaskType,
    #[serde(default)]
    pub provenance: Provenance,
}

impl TaskPlan {
    /// Builds a plan, renumbering steps 1..N in order.
    pub fn new(steps: Vec<SymbolicStep>, task_type: TaskType) -> Self {
        let steps = steps
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.index = i + 1;
                s
            })
            .collect();
        Self { steps, task_type, provenance: Provenance::default() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Numbered natural-language steps from the reasoning stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePlan {
    pub steps: Vec<String>,
}

impl LanguagePlan {
    pub fn new(steps: Vec<String>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::EmptyReasoning);
        }
        Ok(Self { steps })
    }

    pub fn render(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn numbered_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|\s)(\d+)[.)]\s+").unwrap())
}

/// Extracts numbered steps from a reasoning response. Several steps on one
/// line (e.g. joined by arrows) are split apart.
pub fn parse_language_plan(raw: &str) -> Result<LanguagePlan> {
    let mut steps = Vec::new();
    for line in raw.lines() {
        let starts: Vec<_> = numbered_marker().captures_iter(line).collect();
        if starts.is_empty() || !line.trim_start().starts_with(|c: char| c.is_ascii_digit()) {
            continue;
        }
        for (i, cap) in starts.iter().enumerate() {
            let from = cap.get(0).unwrap().end();
            let to = starts.get(i + 1).map(|c| c.get(0).unwrap().start()).unwrap_or(line.len());
            let text = line[from..to]
                .trim()
                .trim_end_matches(['→', '-', '>'])
                .trim()
                .to_string();
            if !text.is_empty() {
                steps.push(text);
            }
        }
    }
    LanguagePlan::new(steps)
}

/// Reason a line of symbolic output was not accepted cleanly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IssueKind {
    Malformed { reason: String },
    UnknownAction { label: String },
    UnknownObject { label: String },
    IndexMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub line: usize,
    #[serde(flatten)]
    pub kind: IssueKind,
}

/// Output of the symbolic-plan parser: steps plus everything it flagged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDraft {
    pub steps: Vec<SymbolicStep>,
    pub issues: Vec<ParseIssue>,
}

impl PlanDraft {
    pub fn into_plan(self, task_type: TaskType) -> TaskPlan {
        TaskPlan::new(self.steps, task_type)
    }
}

fn step_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"^(\d+)\s*[.)]\s*([A-Za-z][A-Za-z0-9_ ]*?)\s*\(\s*([^()]*?)\s*\)\s*(?:\|\s*context\s*:\s*"(.*)"\s*)?$"#,
        )
        .unwrap()
    })
}

/// Parse symbolic-stage output. Never fails on malformed lines; those become
/// issues. Fails only when no line is well-formed.
pub fn parse_symbolic_plan_text(raw: &str, vocab: &Vocabulary) -> Result<PlanDraft> {
    let mut steps = Vec::new();
    let mut issues = Vec::new();
    for (lineno, line) in raw.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let Some(cap) = step_line().captures(line) else {
            issues.push(ParseIssue {
                line: lineno,
                kind: IssueKind::Malformed {
                    reason: "expected `N. action(object)`".to_string(),
                },
            });
            continue;
        };
        let expected = steps.len() + 1;
        let found = cap[1].parse::<usize>().unwrap_or(0);
        if found != expected {
            issues.push(ParseIssue { line: lineno, kind: IssueKind::IndexMismatch { expected, found } });
        }
        let action_raw = normalize_label(&cap[2]);
        let action = match vocab.lookup_action(&action_raw) {
            Some(a) => ActionLabel::Known(a),
            None => {
                issues.push(ParseIssue {
                    line: lineno,
                    kind: IssueKind::UnknownAction { label: action_raw.clone() },
                });
                ActionLabel::Unknown(action_raw)
            }
        };
        let object = normalize_label(&cap[3]);
        if object.is_empty() {
            issues.push(ParseIssue {
                line: lineno,
                kind: IssueKind::Malformed { reason: "empty object label".to_string() },
            });
            continue;
        }
        if !vocab.accepts_object(action.known(), &object) {
            issues.push(ParseIssue {
                line: lineno,
                kind: IssueKind::UnknownObject { label: object.clone() },
            });
        }
        let context = cap.get(4).map(|m| m.as_str());
        steps.push(SymbolicStep::new(expected, action, &object, context));
    }
    if steps.is_empty() {
        return Err(Error::EmptyOutput { issues });
    }
    Ok(PlanDraft { steps, issues })
}

/// Render a plan in the symbolic line grammar.
pub fn render_plan(plan: &TaskPlan) -> String {
    render_steps(&plan.steps)
}

pub fn render_steps(steps: &[SymbolicStep]) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str(&format!("{}. {}({})", step.index, step.action.surface(), step.object_label));
        if let Some(ctx) = &step.context {
            out.push_str(&format!(" | context: \"{ctx}\""));
        }
        out.push('\n');
    }
    out
}
