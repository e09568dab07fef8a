//! Goal prediction over a top-down semantic map.
//!
//! Grid coordinates are `(x, y)` with `y` growing downwards; cells are stored
//! row-major (`y * width + x`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::llm::{CompletionRequest, LlmError, LlmProvider};
use crate::pipeline::{PromptSet, STAGE_ALIGN, STAGE_COLOCATE};
use crate::plan::{normalize_label, SymbolicStep};

pub const DEFAULT_SIGMA: f64 = 2.0;
/// Half-width of the window whose unseen cells make a frontier attractive.
const EXPLORE_WINDOW: usize = 5;

/// `W x W x C` occupancy grid plus the set of cells seen to be free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    pub width: usize,
    pub categories: Vec<String>,
    pub resolution: f64,
    grid: Vec<f64>,
    observed_free: Vec<bool>,
    seen: Vec<bool>,
}

impl SemanticMap {
    pub fn new(width: usize, categories: impl IntoIterator<Item = String>) -> Self {
        let categories: Vec<String> = categories
            .into_iter()
            .map(|c| normalize_label(&c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let c = categories.len();
        Self {
            width,
            categories,
            resolution: 0.25,
            grid: vec![0.0; width * width * c],
            observed_free: vec![false; width * width],
            seen: vec![false; width * width],
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.binary_search(&normalize_label(label)).ok()
    }

    fn slot(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.categories.len() + c
    }

    pub fn value(&self, x: usize, y: usize, c: usize) -> f64 {
        self.grid[self.slot(x, y, c)]
    }

    /// Record an object of `label` at `(x, y)`. Unknown labels are ignored.
    pub fn mark(&mut self, x: usize, y: usize, label: &str) {
        if let Some(c) = self.category_index(label) {
            let i = self.slot(x, y, c);
            self.grid[i] = 1.0;
        }
        self.seen[y * self.width + x] = true;
    }

    pub fn mark_free(&mut self, x: usize, y: usize) {
        self.observed_free[y * self.width + x] = true;
        self.seen[y * self.width + x] = true;
    }

    /// Record that a cell has been looked at, whatever it holds.
    pub fn mark_seen(&mut self, x: usize, y: usize) {
        self.seen[y * self.width + x] = true;
    }

    pub fn is_seen(&self, x: usize, y: usize) -> bool {
        self.seen[y * self.width + x]
    }

    /// Observed free cell with an unseen 4-neighbour.
    pub fn is_frontier(&self, x: usize, y: usize) -> bool {
        let w = self.width;
        if !self.is_observed_free(x, y) {
            return false;
        }
        let mut n = Vec::with_capacity(4);
        if x > 0 {
            n.push((x - 1, y));
        }
        if y > 0 {
            n.push((x, y - 1));
        }
        if x + 1 < w {
            n.push((x + 1, y));
        }
        if y + 1 < w {
            n.push((x, y + 1));
        }
        n.into_iter().any(|(a, b)| !self.is_seen(a, b))
    }

    pub fn is_observed_free(&self, x: usize, y: usize) -> bool {
        self.observed_free[y * self.width + x]
    }

    /// Categories with any mass on the map.
    pub fn observed_categories(&self) -> BTreeSet<String> {
        let c = self.categories.len();
        let mut out = BTreeSet::new();
        for (i, v) in self.grid.iter().enumerate() {
            if *v > 0.0 {
                out.insert(self.categories[i % c].clone());
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.grid.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub label: String,
    pub x: usize,
    pub y: usize,
}

/// Observed instances in first-seen order, unique by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceList {
    pub records: Vec<InstanceRecord>,
}

impl InstanceList {
    /// Insert or move an instance; returns true when it was new.
    pub fn upsert(&mut self, record: InstanceRecord) -> bool {
        match self.records.iter_mut().find(|r| r.id == record.id) {
            Some(r) => {
                *r = record;
                false
            }
            None => {
                self.records.push(record);
                true
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&InstanceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn with_label<'a>(&'a self, label: &str) -> impl Iterator<Item = &'a InstanceRecord> + 'a {
        let label = normalize_label(label);
        self.records.iter().filter(move |r| r.label == label)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Normalized distribution over the cells of a `W x W` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMap {
    width: usize,
    values: Vec<f64>,
}

impl ProbabilityMap {
    /// Normalize nonnegative weights. `None` when the total mass is zero or
    /// not finite.
    pub fn from_weights(width: usize, weights: Vec<f64>) -> Option<Self> {
        assert_eq!(weights.len(), width * width, "weights must cover the grid");
        let weights: Vec<f64> = weights.into_iter().map(|w| if w > 0.0 { w } else { 0.0 }).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        Some(Self { width, values: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn uniform(width: usize) -> Self {
        Self::from_weights(width, vec![1.0; width * width]).expect("nonempty grid")
    }

    pub fn point(width: usize, x: usize, y: usize) -> Self {
        let mut w = vec![0.0; width * width];
        w[y * width + x] = 1.0;
        Self { width, values: w }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn support(&self) -> impl Iterator<Item = GridGoal> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| GridGoal { x: i % self.width, y: i / self.width })
    }

    /// Row-major CSV, one grid row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        crate::write_text(path, &self.to_csv())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridGoal {
    pub x: usize,
    pub y: usize,
}

impl GridGoal {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(&self, other: GridGoal) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

/// Fallback co-location priors keyed `target|landmark`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColocationTable {
    entries: BTreeMap<String, f64>,
}

impl ColocationTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let entries: BTreeMap<String, f64> = serde_json::from_str(text)?;
        Ok(Self { entries: entries.into_iter().map(|(k, v)| (k, v.clamp(0.0, 1.0))).collect() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::read_text(path)?)
    }

    pub fn get(&self, target: &str, landmark: &str) -> f64 {
        let key = format!("{}|{}", normalize_label(target), normalize_label(landmark));
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColocationSource {
    Table,
    Llm,
    /// The provider failed; table values were used instead.
    LlmFailed { error: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColocationOutcome {
    pub probs: BTreeMap<String, f64>,
    pub source: ColocationSource,
    pub error: Option<LlmError>,
}

pub fn render_colocate_prompt(target: &str, landmarks: &BTreeSet<String>, prompts: &PromptSet) -> Result<String> {
    let list = landmarks.iter().cloned().collect::<Vec<_>>().join(", ");
    prompts.colocate.render(&[("target", &normalize_label(target)), ("landmarks", &list)])
}

/// Parse `landmark: p` lines. Values are clamped to [0, 1]; landmarks that
/// are missing or unparseable get 0.
pub fn parse_colocation_response(text: &str, landmarks: &BTreeSet<String>) -> BTreeMap<String, f64> {
    let mut probs: BTreeMap<String, f64> = landmarks.iter().map(|l| (l.clone(), 0.0)).collect();
    for line in text.lines() {
        let Some((name, value)) = line.trim().trim_start_matches("- ").split_once(':') else { continue };
        let name = normalize_label(name);
        let Ok(p) = value.trim().parse::<f64>() else { continue };
        if let Some(slot) = probs.get_mut(&name) {
            *slot = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
    }
    probs
}

/// Co-location probability of `target` for each landmark. Uses the provider
/// when one is given, otherwise the table.
pub fn predict_colocation(
    target: &str,
    landmarks: &BTreeSet<String>,
    provider: Option<&dyn LlmProvider>,
    prompts: &PromptSet,
    table: &ColocationTable,
) -> ColocationOutcome {
    let from_table = || landmarks.iter().map(|l| (l.clone(), table.get(target, l))).collect();
    let Some(provider) = provider else {
        return ColocationOutcome { probs: from_table(), source: ColocationSource::Table, error: None };
    };
    let response = render_colocate_prompt(target, landmarks, prompts)
        .map_err(|e| LlmError::InvalidRequest(e.to_string()))
        .and_then(|prompt| provider.complete(&CompletionRequest::new(STAGE_COLOCATE, prompt)));
    match response {
        Ok(texts) => ColocationOutcome {
            probs: parse_colocation_response(texts.first().map(String::as_str).unwrap_or(""), landmarks),
            source: ColocationSource::Llm,
            error: None,
        },
        Err(e) => ColocationOutcome {
            probs: from_table(),
            source: ColocationSource::LlmFailed { error: e.to_string() },
            error: Some(e),
        },
    }
}

/// Cells a search should skip (already inspected), if any.
pub type CellMask<'a> = Option<&'a [bool]>;

/// Uniform over free cells, restricted to the exploration frontier when
/// one exists.
fn uniform_over_free(map: &SemanticMap, exclude: CellMask<'_>) -> Option<ProbabilityMap> {
    let w = map.width;
    let cells = |frontier: bool| -> Vec<f64> {
        (0..w * w)
            .map(|i| {
                let skip = exclude.is_some_and(|m| m[i]);
                let ok = map.observed_free[i] && (!frontier || map.is_frontier(i % w, i / w));
                if !skip && ok {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    ProbabilityMap::from_weights(w, cells(true)).or_else(|| ProbabilityMap::from_weights(w, cells(false)))
}

/// Frontier cells, weighted by the unseen area around them and by
/// closeness to the agent.
pub fn exploration_map(map: &SemanticMap, agent: GridGoal) -> Option<ProbabilityMap> {
    let w = map.width;
    let weights = (0..w * w)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !map.is_frontier(x, y) {
                return 0.0;
            }
            let d = GridGoal::new(x, y).chebyshev(agent) as f64;
            let mut unseen = 0usize;
            for yy in y.saturating_sub(EXPLORE_WINDOW)..=(y + EXPLORE_WINDOW).min(w - 1) {
                for xx in x.saturating_sub(EXPLORE_WINDOW)..=(x + EXPLORE_WINDOW).min(w - 1) {
                    unseen += !map.is_seen(xx, yy) as usize;
                }
            }
            unseen as f64 / ((1.0 + d) * (1.0 + d))
        })
        .collect();
    ProbabilityMap::from_weights(w, weights)
}

fn colocation_weights(map: &SemanticMap, probs: &BTreeMap<String, f64>, exclude: CellMask<'_>) -> Vec<f64> {
    let w = map.width;
    let weighted: Vec<(usize, f64)> = probs
        .iter()
        .filter_map(|(label, p)| map.category_index(label).map(|c| (c, *p)))
        .collect();
    (0..w * w)
        .map(|i| {
            if exclude.is_some_and(|m| m[i]) {
                return 0.0;
            }
            let (x, y) = (i % w, i / w);
            weighted.iter().map(|(c, p)| p * map.value(x, y, *c)).sum()
        })
        .collect()
}

/// `D_o`: co-location probabilities spread over the landmark cells, with a
/// uniform map over observed free cells when no landmark carries mass.
pub fn colocation_map(map: &SemanticMap, probs: &BTreeMap<String, f64>) -> ProbabilityMap {
    colocation_map_masked(map, probs, None)
}

/// As [`colocation_map`], with `exclude`d cells given zero mass. Falls back
/// to the unmasked map when masking leaves nothing.
pub fn colocation_map_masked(map: &SemanticMap, probs: &BTreeMap<String, f64>, exclude: CellMask<'_>) -> ProbabilityMap {
    let w = map.width;
    ProbabilityMap::from_weights(w, colocation_weights(map, probs, exclude))
        .or_else(|| uniform_over_free(map, exclude))
        .or_else(|| ProbabilityMap::from_weights(w, colocation_weights(map, probs, None)))
        .or_else(|| uniform_over_free(map, None))
        .unwrap_or_else(|| ProbabilityMap::uniform(w))
}

/// `D_c`: isotropic Gaussian around `center`.
pub fn context_distribution(center: GridGoal, sigma: f64, width: usize) -> ProbabilityMap {
    assert!(sigma > 0.0, "sigma must be positive");
    let two_s2 = 2.0 * sigma * sigma;
    let weights = (0..width * width)
        .map(|i| {
            let dx = (i % width) as f64 - center.x as f64;
            let dy = (i / width) as f64 - center.y as f64;
            (-(dx * dx + dy * dy) / two_s2).exp()
        })
        .collect();
    ProbabilityMap::from_weights(width, weights).unwrap_or_else(|| ProbabilityMap::point(width, center.x, center.y))
}

/// Elementwise product, renormalized. Without `d_c`, or when the supports
/// are disjoint, `d_o` is returned.
pub fn fuse_distributions(d_o: &ProbabilityMap, d_c: Option<&ProbabilityMap>) -> ProbabilityMap {
    let Some(d_c) = d_c else { return d_o.clone() };
    assert_eq!(d_o.width, d_c.width, "maps must share a grid");
    let product = d_o.values.iter().zip(&d_c.values).map(|(a, b)| a * b).collect();
    ProbabilityMap::from_weights(d_o.width, product).unwrap_or_else(|| d_o.clone())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "seed", rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    Argmax,
    Sample(u64),
}

/// Argmax takes the lowest row-major index among maxima.
pub fn sample_goal(d: &ProbabilityMap, mode: SampleMode) -> GridGoal {
    match mode {
        SampleMode::Argmax => argmax(d),
        SampleMode::Sample(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_with(d, &mut rng)
        }
    }
}

pub fn argmax(d: &ProbabilityMap) -> GridGoal {
    let mut best = 0;
    for (i, v) in d.values.iter().enumerate() {
        if *v > d.values[best] {
            best = i;
        }
    }
    GridGoal { x: best % d.width, y: best / d.width }
}

/// Draw one cell using a caller-owned generator.
pub fn sample_with<R: rand::Rng + ?Sized>(d: &ProbabilityMap, rng: &mut R) -> GridGoal {
    let dist = WeightedIndex::new(&d.values).expect("normalized map has positive mass");
    let i = dist.sample(rng);
    GridGoal { x: i % d.width, y: i / d.width }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    On,
    Inside,
    Under,
    Above,
    LeftOf,
    RightOf,
    Near,
}

impl Relation {
    const PHRASES: [(&'static str, Relation); 14] = [
        ("in front of", Relation::Near),
        ("to the left of", Relation::LeftOf),
        ("to the right of", Relation::RightOf),
        ("left of", Relation::LeftOf),
        ("right of", Relation::RightOf),
        ("next to", Relation::Near),
        ("beneath", Relation::Under),
        ("below", Relation::Under),
        ("under", Relation::Under),
        ("above", Relation::Above),
        ("inside", Relation::Inside),
        ("beside", Relation::Near),
        ("near", Relation::Near),
        ("on", Relation::On),
    ];

    /// Whether an instance at `c` stands in this relation to an anchor at `a`.
    pub fn holds(self, c: GridGoal, a: GridGoal) -> bool {
        let dx = c.x as i64 - a.x as i64;
        let dy = c.y as i64 - a.y as i64;
        match self {
            Relation::On | Relation::Inside => dx == 0 && dy == 0,
            Relation::Under => dx.abs() <= 1 && dy > 0,
            Relation::Above => dx.abs() <= 1 && dy < 0,
            Relation::LeftOf => dx < 0 && dy.abs() <= 1,
            Relation::RightOf => dx > 0 && dy.abs() <= 1,
            Relation::Near => c.chebyshev(a) <= 2,
        }
    }
}

const ARTICLES: [&str; 4] = ["the", "a", "an", "that"];

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

/// Find the first `<relation> <anchor>` phrase in `context`. The anchor is
/// the rest of the phrase with articles removed, joined with underscores.
pub fn parse_relation(context: &str) -> Option<(Relation, String)> {
    let ws = words(context);
    for start in 0..ws.len() {
        for (phrase, rel) in Relation::PHRASES {
            let pw: Vec<&str> = phrase.split(' ').collect();
            if ws.len() < start + pw.len() || ws[start..start + pw.len()].iter().zip(&pw).any(|(a, b)| a != b) {
                continue;
            }
            let anchor: Vec<&str> = ws[start + pw.len()..]
                .iter()
                .map(String::as_str)
                .filter(|w| !ARTICLES.contains(w))
                .collect();
            if !anchor.is_empty() {
                return Some((rel, anchor.join("_")));
            }
        }
    }
    None
}

/// Anchor instances whose label is the longest suffix of the anchor phrase
/// that names an observed category.
fn anchor_instances<'a>(anchor: &str, instances: &'a InstanceList) -> Vec<&'a InstanceRecord> {
    let parts: Vec<&str> = anchor.split('_').collect();
    for skip in 0..parts.len() {
        let label = parts[skip..].join("_");
        let found: Vec<_> = instances.with_label(&label).collect();
        if !found.is_empty() {
            return found;
        }
    }
    Vec::new()
}

/// Pick the instance of `step.object_label` that matches the step's context
/// phrase. Deterministic and total.
pub fn resolve_context(step: &SymbolicStep, instances: &InstanceList) -> Option<InstanceRecord> {
    let context = step.context.as_deref()?;
    let candidates: Vec<&InstanceRecord> = instances.with_label(&step.object_label).collect();
    if candidates.len() == 1 {
        return Some(candidates[0].clone());
    }
    let (relation, anchor) = parse_relation(context)?;
    let anchors = anchor_instances(&anchor, instances);
    if anchors.is_empty() || candidates.is_empty() {
        return None;
    }
    let pos = |r: &InstanceRecord| GridGoal::new(r.x, r.y);
    candidates
        .into_iter()
        .map(|c| {
            let nearest = anchors
                .iter()
                .filter(|a| a.id != c.id)
                .min_by_key(|a| (manhattan(pos(c), pos(a)), a.id.clone()));
            let (score, dist) = match nearest {
                Some(a) => (relation.holds(pos(c), pos(a)) as u8, manhattan(pos(c), pos(a))),
                None => (0, usize::MAX),
            };
            (std::cmp::Reverse(score), dist, c.id.clone(), c)
        })
        .min_by(|a, b| (&a.0, a.1, &a.2).cmp(&(&b.0, b.1, &b.2)))
        .map(|t| t.3.clone())
}

fn manhattan(a: GridGoal, b: GridGoal) -> usize {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

pub fn render_align_prompt(step: &SymbolicStep, instances: &InstanceList, prompts: &PromptSet) -> Result<String> {
    let list = instances
        .records
        .iter()
        .map(|r| format!("{} {} {} {}", r.id, r.label, r.x, r.y))
        .collect::<Vec<_>>()
        .join("\n");
    prompts.align.render(&[
        ("target", &step.object_label),
        ("context", step.context.as_deref().unwrap_or("")),
        ("instances", &list),
    ])
}

/// LLM-backed alternative to [`resolve_context`]: the reply must name the id
/// of an observed instance of the target label.
pub fn resolve_context_llm(
    step: &SymbolicStep,
    instances: &InstanceList,
    provider: &dyn LlmProvider,
    prompts: &PromptSet,
) -> std::result::Result<Option<InstanceRecord>, LlmError> {
    if step.context.is_none() {
        return Ok(None);
    }
    let prompt = render_align_prompt(step, instances, prompts).map_err(|e| LlmError::InvalidRequest(e.to_string()))?;
    let reply = provider.complete(&CompletionRequest::new(STAGE_ALIGN, prompt))?;
    let id = reply.first().map(|s| s.trim()).unwrap_or("");
    Ok(instances.with_label(&step.object_label).find(|r| r.id == id).cloned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextResolver {
    Rules,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizeParams {
    pub sigma: f64,
    pub mode: SampleMode,
    pub use_context: bool,
    pub resolver: ContextResolver,
    /// Ask the provider for co-location probabilities (otherwise the table).
    pub llm_colocation: bool,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        Self { sigma: DEFAULT_SIGMA, mode: SampleMode::Argmax, use_context: true, resolver: ContextResolver::Rules, llm_colocation: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMethod {
    /// Target already observed: go to its nearest instance.
    Observed,
    /// Goal drawn from the (possibly fused) distribution.
    Distribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub goal: GridGoal,
    pub method: GoalMethod,
    pub resolved: Option<InstanceRecord>,
    pub colocation: Option<ColocationSource>,
    /// Provider failure encountered on the way, if any.
    pub error: Option<LlmError>,
}

/// Inputs that stay fixed while localizing one step.
pub struct LocalizeContext<'a> {
    pub map: &'a SemanticMap,
    pub instances: &'a InstanceList,
    pub agent: GridGoal,
    /// Instances that must not be chosen (already used up by the task).
    pub excluded_ids: &'a BTreeSet<String>,
    /// Cells searched without success.
    pub inspected: CellMask<'a>,
    pub provider: Option<&'a dyn LlmProvider>,
    pub prompts: &'a PromptSet,
    pub table: &'a ColocationTable,
}

/// Navigation goal for one step.
pub fn localize(step: &SymbolicStep, ctx: &LocalizeContext<'_>, params: &LocalizeParams) -> Localization {
    let w = ctx.map.width;
    let usable: Vec<&InstanceRecord> = ctx
        .instances
        .with_label(&step.object_label)
        .filter(|r| !ctx.excluded_ids.contains(&r.id))
        .collect();
    let wants_context = params.use_context && step.context.is_some();

    if !usable.is_empty() && !wants_context {
        let best = usable
            .iter()
            .min_by_key(|r| (GridGoal::new(r.x, r.y).chebyshev(ctx.agent), r.y * w + r.x, r.id.clone()))
            .unwrap();
        return Localization {
            goal: GridGoal::new(best.x, best.y),
            method: GoalMethod::Observed,
            resolved: None,
            colocation: None,
            error: None,
        };
    }

    let mut error = None;
    let mut source = None;
    let d_o = if usable.is_empty() {
        let landmarks: BTreeSet<String> = ctx
            .map
            .observed_categories()
            .into_iter()
            .filter(|c| *c != step.object_label)
            .collect();
        let probs = if landmarks.is_empty() {
            BTreeMap::new()
        } else {
            let provider = if params.llm_colocation { ctx.provider } else { None };
            let out = predict_colocation(&step.object_label, &landmarks, provider, ctx.prompts, ctx.table);
            source = Some(out.source);
            error = out.error;
            out.probs
        };
        ProbabilityMap::from_weights(w, colocation_weights(ctx.map, &probs, ctx.inspected))
            .or_else(|| exploration_map(ctx.map, ctx.agent))
            .unwrap_or_else(|| colocation_map_masked(ctx.map, &probs, ctx.inspected))
    } else {
        let mut weights = vec![0.0; w * w];
        for r in &usable {
            weights[r.y * w + r.x] = 1.0;
        }
        ProbabilityMap::from_weights(w, weights).expect("at least one instance")
    };

    let mut resolved = None;
    if wants_context {
        let visible = InstanceList {
            records: ctx.instances.records.iter().filter(|r| !ctx.excluded_ids.contains(&r.id)).cloned().collect(),
        };
        resolved = match (params.resolver, ctx.provider) {
            (ContextResolver::Llm, Some(p)) => match resolve_context_llm(step, &visible, p, ctx.prompts) {
                Ok(r) => r,
                Err(e) => {
                    error.get_or_insert(e);
                    resolve_context(step, &visible)
                }
            },
            _ => resolve_context(step, &visible),
        };
    }
    let d_c = resolved.as_ref().map(|r| context_distribution(GridGoal::new(r.x, r.y), params.sigma, w));
    let fused = fuse_distributions(&d_o, d_c.as_ref());
    Localization {
        goal: sample_goal(&fused, params.mode),
        method: GoalMethod::Distribution,
        resolved,
        colocation: source,
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::PrimitiveAction;

    fn map_with(width: usize, cats: &[&str]) -> SemanticMap {
        SemanticMap::new(width, cats.iter().map(|s| s.to_string()))
    }

    fn inst(id: &str, label: &str, x: usize, y: usize) -> InstanceRecord {
        InstanceRecord { id: id.into(), label: label.into(), x, y }
    }

    #[test]
    fn single_category_is_uniform_over_its_cells() {
        let mut m = map_with(6, &["table"]);
        for (x, y) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            m.mark(x, y, "table");
        }
        let d = colocation_map(&m, &BTreeMap::from([("table".to_string(), 1.0)]));
        assert!((d.get(1, 1) - 0.25).abs() < 1e-12);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn zero_probs_fall_back_to_free_cells() {
        let mut m = map_with(4, &["table"]);
        m.mark(0, 0, "table");
        m.mark_free(1, 1);
        m.mark_free(2, 1);
        let d = colocation_map(&m, &BTreeMap::from([("table".to_string(), 0.0)]));
        assert_eq!(d.get(1, 1), 0.5);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn fuse_hand_example() {
        let d_o = ProbabilityMap::from_weights(1, vec![1.0]).unwrap();
        assert_eq!(fuse_distributions(&d_o, None), d_o);
        let a = ProbabilityMap { width: 2, values: vec![0.5, 0.5, 0.0, 0.0] };
        let b = ProbabilityMap { width: 2, values: vec![0.8, 0.2, 0.0, 0.0] };
        let f = fuse_distributions(&a, Some(&b));
        assert!((f.values[0] - 0.8).abs() < 1e-12 && (f.values[1] - 0.2).abs() < 1e-12);
        let c = ProbabilityMap { width: 2, values: vec![0.0, 0.0, 1.0, 0.0] };
        assert_eq!(fuse_distributions(&a, Some(&c)), a);
    }

    #[test]
    fn gaussian_mode_and_sum() {
        let d = context_distribution(GridGoal::new(3, 7), 2.0, 12);
        assert_eq!(argmax(&d), GridGoal::new(3, 7));
        assert!((d.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        let d = ProbabilityMap { width: 2, values: vec![0.0, 0.5, 0.5, 0.0] };
        assert_eq!(sample_goal(&d, SampleMode::Argmax), GridGoal::new(1, 0));
        let p = ProbabilityMap::point(9, 7, 7);
        assert_eq!(sample_goal(&p, SampleMode::Sample(3)), GridGoal::new(7, 7));
    }

    #[test]
    fn relation_phrases() {
        assert_eq!(
            parse_relation("the cabinet beneath the coffee machine"),
            Some((Relation::Under, "coffee_machine".into()))
        );
        assert_eq!(parse_relation("the mug to the left of the sink"), Some((Relation::LeftOf, "sink".into())));
        assert_eq!(parse_relation("blue one"), None);
    }

    #[test]
    fn resolves_cabinet_beneath_coffee_machine() {
        let instances = InstanceList {
            records: vec![inst("cab1", "cabinet", 9, 2), inst("cab2", "cabinet", 3, 5), inst("cm", "coffee_machine", 3, 4)],
        };
        let step = SymbolicStep::new(1, PrimitiveAction::Put, "cabinet", Some("the cabinet beneath the coffee machine"));
        assert_eq!(resolve_context(&step, &instances).unwrap().id, "cab2");

        let no_anchor = InstanceList { records: instances.records[..2].to_vec() };
        assert_eq!(resolve_context(&step, &no_anchor), None);

        let single = InstanceList { records: vec![inst("cab1", "cabinet", 9, 2)] };
        assert_eq!(resolve_context(&step, &single).unwrap().id, "cab1");
    }

    #[test]
    fn colocation_response_parsing() {
        let lms: BTreeSet<String> = ["countertop", "sofa"].map(String::from).into();
        let p = parse_colocation_response("countertop: 1.7\nsofa: -2", &lms);
        assert_eq!(p["countertop"], 1.0);
        assert_eq!(p["sofa"], 0.0);
        let p = parse_colocation_response("", &lms);
        assert!(p.values().all(|v| *v == 0.0));
    }

    #[test]
    fn fallback_table_lookup() {
        let table = crate::data::colocation_table();
        let lms: BTreeSet<String> = ["countertop", "sofa"].map(String::from).into();
        let out = predict_colocation("knife", &lms, None, &PromptSet::default(), &table);
        assert_eq!(out.probs["countertop"], 0.9);
        assert_eq!(out.probs["sofa"], 0.05);
        assert_eq!(out.source, ColocationSource::Table);
    }

    #[test]
    fn csv_has_one_row_per_line() {
        let csv = ProbabilityMap::uniform(3).to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 3);
    }
}
