//! Suites on disk, per-episode providers, evaluation and cassette authoring.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Domain;
use crate::error::{Error, Result};
use crate::llm::{sha256_hex, Cassette, LlmProvider, RecordingProvider, ReplayProvider};
use crate::localization::ColocationTable;
use crate::pipeline::{Ablation, PipelineConfig, Planner};
use crate::plan::Instruction;
use crate::sim::{
    compute_metrics, run_episode, EpisodeEnv, EpisodeParams, EpisodeReport, EpisodeResult, GeneratedTask, Scene,
    TaskSpec,
};
use crate::synth::{FaultConfig, SynthResponder};

pub const MANIFEST_NAME: &str = "suite.json";

/// One line of a suite manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    /// Relative to the manifest's directory.
    pub scene_path: String,
    pub task: TaskSpec,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub name: String,
    pub dir: PathBuf,
    pub entries: Vec<SuiteEntry>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<SuiteEntry> = serde_json::from_str(&crate::read_text(path)?)?;
        for e in &entries {
            e.task.validate()?;
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let name = dir
            .file_name()
            .map(|d| d.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string_lossy().into_owned());
        Ok(Self { name, dir, entries })
    }

    pub fn scene(&self, entry: &SuiteEntry) -> Result<Scene> {
        Scene::load(&self.dir.join(&entry.scene_path))
    }

    /// Write `suite.json` plus one scene file per task under `dir`.
    pub fn write(dir: &Path, tasks: &[GeneratedTask]) -> Result<PathBuf> {
        let mut entries = Vec::new();
        for t in tasks {
            let scene_path = format!("scenes/{}.json", t.task.id);
            t.scene.save(&dir.join(&scene_path))?;
            entries.push(SuiteEntry { scene_path, task: t.task.clone(), instruction: t.instruction.clone() });
        }
        let path = dir.join(MANIFEST_NAME);
        crate::write_text(&path, &(serde_json::to_string_pretty(&entries)? + "\n"))?;
        Ok(path)
    }
}

/// Where each episode's completions come from.
#[derive(Clone)]
pub enum Backend {
    /// A recorded cassette; every episode replays with fresh cursors.
    Replay(Arc<ReplayProvider>),
    /// The deterministic responder built from each episode's task.
    Synth(FaultConfig),
    /// A shared provider, typically a live endpoint.
    Shared(Arc<dyn LlmProvider>),
}

/// Everything an evaluation run holds fixed.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub domain: Domain,
    pub pipeline: PipelineConfig,
    pub episode: EpisodeParams,
    pub table: ColocationTable,
}

impl EvalContext {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain,
            pipeline: PipelineConfig::default(),
            episode: EpisodeParams::default(),
            table: crate::data::colocation_table(),
        }
    }

    /// Apply stage bypasses to both planning and localization.
    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.pipeline.ablation = ablation;
        self.episode.localize.use_context = !ablation.no_context;
        self
    }

    /// Digest of every setting that influences results.
    pub fn digest(&self) -> String {
        let p = &self.pipeline;
        let prompts: Vec<&str> = [&p.prompts.classify, &p.prompts.reason, &p.prompts.symbolic, &p.prompts.correct, &p.prompts.colocate, &p.prompts.align]
            .iter()
            .map(|t| t.text.as_str())
            .collect();
        let value = serde_json::json!({
            "domain": self.domain.name,
            "vote_n": p.vote_n,
            "max_corrections": p.max_corrections,
            "max_replans": p.max_replans,
            "temperature": p.temperature,
            "max_tokens": p.max_tokens,
            "correction": p.correction,
            "ablation": p.ablation,
            "episode": self.episode,
            "prompts": sha256_hex(prompts.join("\u{0}").as_bytes()),
        });
        sha256_hex(value.to_string().as_bytes())
    }
}

/// Result of one episode, plus its recording when asked for.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub report: EpisodeReport,
    pub recorded: Option<Cassette>,
}

fn run_with(suite: &Suite, entry: &SuiteEntry, provider: &dyn LlmProvider, ctx: &EvalContext) -> Result<EpisodeReport> {
    let scene = suite.scene(entry)?;
    let instruction = Instruction::new(&entry.instruction)?;
    let planner = Planner::new(&ctx.domain, &ctx.pipeline);
    let env = EpisodeEnv {
        provider: Some(provider),
        prompts: &ctx.pipeline.prompts,
        table: &ctx.table,
        params: &ctx.episode,
    };
    run_episode(&scene, &entry.task, &instruction, |i| planner.plan_full(i, provider).map(|o| o.plan), &env)
}

/// Run the `index`-th suite entry against its own provider instance.
pub fn run_entry(suite: &Suite, index: usize, backend: &Backend, record: bool, ctx: &EvalContext) -> Result<EpisodeOutcome> {
    let entry = &suite.entries[index];
    let provider: Box<dyn LlmProvider> = match backend {
        Backend::Replay(r) => Box::new(r.fork()),
        Backend::Synth(faults) => Box::new(SynthResponder::new(
            entry.task.clone(),
            faults.schedule(suite.entries.len())[index],
            ctx.table.clone(),
            ctx.domain.vocabulary.clone(),
        )),
        Backend::Shared(p) => Box::new(Arc::clone(p)),
    };
    if record {
        let recorder = RecordingProvider::new(provider);
        let report = run_with(suite, entry, &recorder, ctx)?;
        Ok(EpisodeOutcome { report, recorded: Some(recorder.cassette()) })
    } else {
        Ok(EpisodeOutcome { report: run_with(suite, entry, provider.as_ref(), ctx)?, recorded: None })
    }
}

/// Aggregate report over a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub suite: String,
    pub n_episodes: usize,
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "GC")]
    pub gc: f64,
    #[serde(rename = "PLWSR")]
    pub plwsr: f64,
    #[serde(rename = "PLWGC")]
    pub plwgc: f64,
    pub config_digest: String,
}

pub fn summarize(suite: &str, results: &[EpisodeResult], config_digest: &str) -> Result<Summary> {
    let m = compute_metrics(results)?;
    Ok(Summary {
        suite: suite.to_string(),
        n_episodes: results.len(),
        sr: m.sr,
        gc: m.gc,
        plwsr: m.plwsr,
        plwgc: m.plwgc,
        config_digest: config_digest.to_string(),
    })
}

/// One JSON object per line, ordered by episode id.
pub fn results_jsonl(results: &[EpisodeResult]) -> Result<String> {
    let mut sorted: Vec<&EpisodeResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::new();
    for r in sorted {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Ordered by episode id.
    pub reports: Vec<EpisodeReport>,
    pub summary: Summary,
    /// Merged recording of every episode when recording was requested.
    pub cassette: Option<Cassette>,
}

impl Evaluation {
    pub fn results(&self) -> Vec<EpisodeResult> {
        self.reports.iter().map(|r| r.result.clone()).collect()
    }
}

/// Collect per-episode outcomes into an evaluation.
pub fn assemble(suite: &Suite, mut outcomes: Vec<EpisodeOutcome>, ctx: &EvalContext) -> Result<Evaluation> {
    if outcomes.is_empty() {
        return Err(Error::EmptyResults);
    }
    outcomes.sort_by(|a, b| a.report.result.id.cmp(&b.report.result.id));
    let mut cassette: Option<Cassette> = None;
    for o in &outcomes {
        if let Some(rec) = &o.recorded {
            cassette.get_or_insert_with(Cassette::new).merge_prefix(rec)?;
        }
    }
    let reports: Vec<EpisodeReport> = outcomes.into_iter().map(|o| o.report).collect();
    let results: Vec<EpisodeResult> = reports.iter().map(|r| r.result.clone()).collect();
    let summary = summarize(&suite.name, &results, &ctx.digest())?;
    Ok(Evaluation { reports, summary, cassette })
}

/// Evaluate every entry sequentially.
pub fn evaluate(suite: &Suite, backend: &Backend, record: bool, ctx: &EvalContext) -> Result<Evaluation> {
    let outcomes = (0..suite.entries.len())
        .map(|i| run_entry(suite, i, backend, record, ctx))
        .collect::<Result<Vec<_>>>()?;
    assemble(suite, outcomes, ctx)
}

/// Record the synthetic responder under each ablation and merge the
/// recordings into one cassette that replays all of them.
pub fn author_cassette(suite: &Suite, faults: FaultConfig, ablations: &[Ablation], ctx: &EvalContext) -> Result<Cassette> {
    let mut cassette = Cassette::new();
    for ab in ablations {
        let run_ctx = ctx.clone().with_ablation(*ab);
        let eval = evaluate(suite, &Backend::Synth(faults), true, &run_ctx)?;
        if let Some(rec) = eval.cassette {
            cassette.merge_prefix(&rec)?;
        }
    }
    Ok(cassette)
}
