//! Command-line front end: plan and run episodes, evaluate suites, validate
//! plans, author cassettes and generate task suites.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use flowplan::constraints::{parse_constraint_config, validate_plan};
use flowplan::data::Domain;
use flowplan::harness::{
    assemble, author_cassette, results_jsonl, run_entry, Backend, EvalContext, Suite, SuiteEntry,
};
use flowplan::llm::{Cassette, LiveProvider, LlmError, LlmProvider, ProviderMode, RecordingProvider, ReplayProvider};
use flowplan::localization::SampleMode;
use flowplan::pipeline::{Ablation, PipelineTrace, Planner, PromptSet, TaskInfoRegistry};
use flowplan::plan::{parse_symbolic_plan_text, render_plan, Instruction, IssueKind, TaskCategory, TaskType};
use flowplan::sim::{generate_task_suite, run_episode, standard_mix, EpisodeEnv, Scene, TaskKind, TaskSpec, DEFAULT_WIDTH};
use flowplan::synth::{FaultConfig, SynthResponder};

const EXIT_CONFIG: u8 = 1;
const EXIT_CASSETTE_MISS: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "flowplan", version, about = "Multi-stage LLM task planning with context-aligned localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one instruction and, given a task, run it in its scene.
    Run(RunArgs),
    /// Evaluate every episode of a suite.
    Eval(EvalArgs),
    /// Check a plan file against a constraint profile.
    Validate(ValidateArgs),
    /// Author or inspect LLM cassettes.
    #[command(subcommand)]
    Cassette(CassetteCommand),
    /// Generate a task suite.
    Generate(GenerateArgs),
}

/// How completions are obtained.
#[derive(Debug, Clone, PartialEq)]
enum LlmArg {
    Mode(ProviderMode),
    /// The deterministic responder built from the task.
    Synth,
}

impl std::str::FromStr for LlmArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "synth" {
            return Ok(LlmArg::Synth);
        }
        s.parse::<ProviderMode>()
            .map(LlmArg::Mode)
            .map_err(|e| format!("{e}, or synth"))
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// none | live | replay:<cassette> | record:<cassette> | synth
    #[arg(long, default_value = "none")]
    llm: LlmArg,
    /// Domain whose vocabulary, task info and profiles are used.
    #[arg(long, default_value = "alfred")]
    domain: String,
    /// Replace the constraint profile of the same id with this file.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Task-info registry JSON.
    #[arg(long)]
    task_info: Option<PathBuf>,
    /// Directory of prompt templates.
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// Sample navigation goals with this seed instead of taking the argmax.
    #[arg(long)]
    sample_seed: Option<u64>,
    /// Seed of the synthetic responder.
    #[arg(long, default_value_t = 1)]
    fault_seed: u64,
    /// Inject symbolic-stage faults into the synthetic responder.
    #[arg(long)]
    faulty: bool,
    #[arg(long)]
    no_task_info: bool,
    #[arg(long)]
    no_language_reasoning: bool,
    #[arg(long)]
    no_logical_eval: bool,
    #[arg(long)]
    no_context: bool,
}

impl CommonArgs {
    fn ablation(&self) -> Ablation {
        Ablation {
            no_task_info: self.no_task_info,
            no_language_reasoning: self.no_language_reasoning,
            no_logical_eval: self.no_logical_eval,
            no_context: self.no_context,
        }
    }

    fn faults(&self) -> FaultConfig {
        if self.faulty {
            FaultConfig::faulty(self.fault_seed)
        } else {
            FaultConfig::clean(self.fault_seed)
        }
    }

    fn context(&self) -> anyhow::Result<EvalContext> {
        let mut domain = Domain::by_name(&self.domain).ok_or_else(|| anyhow!("unknown domain `{}`", self.domain))?;
        if let Some(path) = &self.rules {
            domain.profiles.insert(load_rules(path)?);
        }
        if let Some(path) = &self.task_info {
            domain.task_info = TaskInfoRegistry::load(path)?;
        }
        let mut ctx = EvalContext::new(domain).with_ablation(self.ablation());
        if let Some(dir) = &self.prompts {
            ctx.pipeline.prompts = PromptSet::load_dir(dir)?;
        }
        if let Some(seed) = self.sample_seed {
            ctx.episode.localize.mode = SampleMode::Sample(seed);
        }
        Ok(ctx)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scene JSON.
    #[arg(long, conflicts_with = "suite")]
    scene: Option<PathBuf>,
    /// Task JSON for the scene; without it only planning runs.
    #[arg(long, requires = "scene")]
    task: Option<PathBuf>,
    /// Suite manifest to take the scene, task and instruction from.
    #[arg(long, requires = "id")]
    suite: Option<PathBuf>,
    /// Episode id within the suite.
    #[arg(long)]
    id: Option<String>,
    /// Instruction text; defaults to the suite entry's.
    #[arg(long)]
    instruction: Option<String>,
    /// Write the pipeline trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Suite manifest.
    #[arg(long)]
    suite: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write per-episode results as JSON lines.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Write the summary JSON here as well as to stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Plan in the `N. action(object)` grammar. Lines starting with `#` are ignored.
    plan: PathBuf,
    /// Constraint profile file; defaults to the bundled household profile.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, default_value = "alfred")]
    domain: String,
    /// Print the report as JSON (the default output is also JSON, pretty-printed).
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum CassetteCommand {
    /// Record the synthetic responder over a suite under several ablations.
    Author(AuthorArgs),
    /// Print per-stage entry and response counts.
    Inspect {
        cassette: PathBuf,
    },
}

#[derive(Args)]
struct AuthorArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    fault_seed: u64,
    #[arg(long)]
    faulty: bool,
    /// Comma-separated ablation names (base, no_task_info, no_language_reasoning, no_logical_eval, no_context).
    #[arg(long, value_delimiter = ',', default_value = "base")]
    ablations: Vec<String>,
    #[arg(long, default_value = "alfred")]
    domain: String,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    /// Output directory for the manifest and scenes.
    #[arg(long)]
    out: PathBuf,
    /// Task kinds such as `heat_place`, `cool_place+slicing` or `pick_place@context`.
    /// Defaults to the 14 task types plus six context kinds.
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<String>,
    /// Tasks per kind.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = DEFAULT_WIDTH)]
    width: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Cassette(CassetteCommand::Author(args)) => cmd_author(args),
        Command::Cassette(CassetteCommand::Inspect { cassette }) => cmd_inspect(&cassette),
        Command::Generate(args) => cmd_generate(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    let miss = e.chain().any(|cause| {
        matches!(cause.downcast_ref::<LlmError>(), Some(LlmError::CassetteMiss { .. }))
            || matches!(
                cause.downcast_ref::<flowplan::Error>().and_then(flowplan::Error::llm),
                Some(LlmError::CassetteMiss { .. })
            )
    });
    if miss {
        EXIT_CASSETTE_MISS
    } else {
        EXIT_CONFIG
    }
}

fn load_rules(path: &Path) -> anyhow::Result<flowplan::constraints::ConstraintConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_constraint_config(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_pretty<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Provider for a single run, plus the recorder to save afterwards.
enum RunProvider {
    Plain(Box<dyn LlmProvider>),
    Recording(RecordingProvider<Box<dyn LlmProvider>>, PathBuf),
}

impl RunProvider {
    fn provider(&self) -> &dyn LlmProvider {
        match self {
            RunProvider::Plain(p) => p.as_ref(),
            RunProvider::Recording(r, _) => r,
        }
    }
}

fn run_provider(common: &CommonArgs, task: Option<&TaskSpec>, ctx: &EvalContext) -> anyhow::Result<RunProvider> {
    Ok(match &common.llm {
        LlmArg::Mode(ProviderMode::None) => bail!("planning needs a provider; pass --llm"),
        LlmArg::Mode(ProviderMode::Live) => RunProvider::Plain(Box::new(LiveProvider::from_env()?)),
        LlmArg::Mode(ProviderMode::Replay(path)) => RunProvider::Plain(Box::new(ReplayProvider::from_file(path)?)),
        LlmArg::Mode(ProviderMode::Record(path)) => {
            RunProvider::Recording(RecordingProvider::new(Box::new(LiveProvider::from_env()?)), path.clone())
        }
        LlmArg::Synth => {
            let task = task.ok_or_else(|| anyhow!("--llm synth needs a task"))?;
            let faults = common.faults().schedule(1)[0];
            RunProvider::Plain(Box::new(SynthResponder::new(
                task.clone(),
                faults,
                ctx.table.clone(),
                ctx.domain.vocabulary.clone(),
            )))
        }
    })
}

fn cmd_run(args: RunArgs) -> anyhow::Result<u8> {
    let ctx = args.common.context()?;
    let (scene, task, default_instruction): (Option<Scene>, Option<TaskSpec>, Option<String>) =
        match (&args.suite, &args.scene) {
            (Some(manifest), _) => {
                let suite = Suite::load(manifest)?;
                let id = args.id.as_deref().unwrap_or_default();
                let entry: &SuiteEntry = suite
                    .entries
                    .iter()
                    .find(|e| e.task.id == id)
                    .ok_or_else(|| anyhow!("no episode `{id}` in {}", manifest.display()))?;
                (Some(suite.scene(entry)?), Some(entry.task.clone()), Some(entry.instruction.clone()))
            }
            (None, Some(scene)) => {
                let task = match &args.task {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                        let task: TaskSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                        task.validate()?;
                        Some(task)
                    }
                    None => None,
                };
                (Some(Scene::load(scene)?), task, None)
            }
            (None, None) => (None, None, None),
        };
    let text = args
        .instruction
        .clone()
        .or(default_instruction)
        .ok_or_else(|| anyhow!("pass --instruction, or --suite with --id"))?;
    let instruction = Instruction::new(text)?;
    let provider = run_provider(&args.common, task.as_ref(), &ctx)?;
    let planner = Planner::new(&ctx.domain, &ctx.pipeline);
    let trace: RefCell<Option<PipelineTrace>> = RefCell::new(None);
    let plan_once = |i: &Instruction| {
        let outcome = planner.plan_full(i, provider.provider());
        match &outcome {
            Ok(o) => *trace.borrow_mut() = Some(o.trace.clone()),
            Err(flowplan::Error::PlanningExhausted { trace: t, .. }) => *trace.borrow_mut() = Some((**t).clone()),
            Err(_) => {}
        }
        outcome.map(|o| o.plan)
    };

    match (&scene, &task) {
        (Some(scene), Some(task)) => {
            let env = EpisodeEnv {
                provider: Some(provider.provider()),
                prompts: &ctx.pipeline.prompts,
                table: &ctx.table,
                params: &ctx.episode,
            };
            let report = run_episode(scene, task, &instruction, plan_once, &env)?;
            if args.json {
                print!("{}", to_pretty(&report)?);
            } else {
                match &report.plan {
                    Some(plan) => print!("{}", render_plan(plan)),
                    None => println!("planning failed: {}", report.planning_error.as_deref().unwrap_or("unknown")),
                }
                for step in &report.steps {
                    let status = step.error.as_deref().unwrap_or("ok");
                    println!("[{}] {} path={} rounds={} {status}", step.index, step.step, step.path_length, step.search_rounds);
                }
                println!("{}", serde_json::to_string(&report.result)?);
            }
        }
        _ => {
            let plan = plan_once(&instruction)?;
            if args.json {
                print!("{}", to_pretty(&plan)?);
            } else {
                print!("{}", render_plan(&plan));
            }
        }
    }

    if let Some(path) = &args.trace {
        let trace = trace.borrow().clone().unwrap_or_else(|| PipelineTrace::new(&instruction));
        write_file(path, &to_pretty(&trace)?)?;
    }
    if let RunProvider::Recording(recorder, path) = &provider {
        recorder.save(path)?;
    }
    Ok(0)
}

fn eval_backend(common: &CommonArgs) -> anyhow::Result<(Backend, Option<PathBuf>)> {
    Ok(match &common.llm {
        LlmArg::Mode(ProviderMode::None) => bail!("evaluation needs a provider; pass --llm"),
        LlmArg::Mode(ProviderMode::Live) => (Backend::Shared(Arc::new(LiveProvider::from_env()?)), None),
        LlmArg::Mode(ProviderMode::Replay(path)) => (Backend::Replay(Arc::new(ReplayProvider::from_file(path)?)), None),
        LlmArg::Mode(ProviderMode::Record(path)) => {
            (Backend::Shared(Arc::new(LiveProvider::from_env()?)), Some(path.clone()))
        }
        LlmArg::Synth => (Backend::Synth(common.faults()), None),
    })
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<u8> {
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let ctx = args.common.context()?;
    let suite = Suite::load(&args.suite)?;
    let (backend, record_to) = eval_backend(&args.common)?;
    let record = record_to.is_some();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let outcomes = pool.install(|| {
        (0..suite.entries.len())
            .into_par_iter()
            .map(|i| run_entry(&suite, i, &backend, record, &ctx))
            .collect::<flowplan::Result<Vec<_>>>()
    })?;
    let eval = assemble(&suite, outcomes, &ctx)?;
    if let Some(path) = &args.results {
        write_file(path, &results_jsonl(&eval.results())?)?;
    }
    let summary = to_pretty(&eval.summary)?;
    if let Some(path) = &args.summary {
        write_file(path, &summary)?;
    }
    if let (Some(path), Some(cassette)) = (&record_to, &eval.cassette) {
        cassette.save(path)?;
    }
    print!("{summary}");
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<u8> {
    let domain = Domain::by_name(&args.domain).ok_or_else(|| anyhow!("unknown domain `{}`", args.domain))?;
    let config = match &args.rules {
        Some(path) => load_rules(path)?,
        None => domain
            .profiles
            .get(&args.domain)
            .cloned()
            .ok_or_else(|| anyhow!("no bundled profile for `{}`", args.domain))?,
    };
    let raw = std::fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
    let text: String = raw
        .lines()
        .map(|l| if l.trim_start().starts_with('#') { "" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let draft = parse_symbolic_plan_text(&text, &domain.vocabulary)
        .with_context(|| format!("parsing {}", args.plan.display()))?;
    if let Some(issue) = draft
        .issues
        .iter()
        .find(|i| matches!(i.kind, IssueKind::Malformed { .. } | IssueKind::IndexMismatch { .. }))
    {
        bail!("{}: line {}: {}", args.plan.display(), issue.line, serde_json::to_string(&issue.kind)?);
    }
    let plan = draft.into_plan(TaskType::new(TaskCategory::PickPlace, false));
    let report = validate_plan(&plan, &config, &domain.vocabulary);
    if args.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", to_pretty(&report)?);
    }
    if report.is_valid() {
        Ok(0)
    } else {
        for v in &report.violations {
            eprintln!("step {}: rule `{}`: {}", v.step_index, v.rule_id, v.message);
        }
        for u in &report.unknown_labels {
            eprintln!("step {}: unknown label `{}`", u.step_index, u.label);
        }
        Ok(EXIT_INVALID)
    }
}

fn parse_ablation(name: &str) -> anyhow::Result<Ablation> {
    let mut ab = Ablation::default();
    for part in name.split('+') {
        match part.trim() {
            "base" => {}
            "no_task_info" => ab.no_task_info = true,
            "no_language_reasoning" => ab.no_language_reasoning = true,
            "no_logical_eval" => ab.no_logical_eval = true,
            "no_context" => ab.no_context = true,
            other => bail!("unknown ablation `{other}`"),
        }
    }
    Ok(ab)
}

fn cmd_author(args: AuthorArgs) -> anyhow::Result<u8> {
    let domain = Domain::by_name(&args.domain).ok_or_else(|| anyhow!("unknown domain `{}`", args.domain))?;
    let suite = Suite::load(&args.suite)?;
    let ablations = args.ablations.iter().map(|a| parse_ablation(a)).collect::<anyhow::Result<Vec<_>>>()?;
    let faults = if args.faulty { FaultConfig::faulty(args.fault_seed) } else { FaultConfig::clean(args.fault_seed) };
    let cassette = author_cassette(&suite, faults, &ablations, &EvalContext::new(domain))?;
    cassette.save(&args.out)?;
    println!("{} entries, {} responses -> {}", cassette.entries.len(), cassette.response_count(), args.out.display());
    Ok(0)
}

fn cmd_inspect(path: &Path) -> anyhow::Result<u8> {
    let cassette = Cassette::load(path)?;
    let mut stages: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for e in &cassette.entries {
        let s = stages.entry(e.stage_id.as_str()).or_default();
        s.0 += 1;
        s.1 += e.responses.len();
    }
    let by_stage: BTreeMap<&str, serde_json::Value> = stages
        .into_iter()
        .map(|(k, (entries, responses))| (k, serde_json::json!({"entries": entries, "responses": responses})))
        .collect();
    let value = serde_json::json!({
        "version": cassette.version,
        "entries": cassette.entries.len(),
        "responses": cassette.response_count(),
        "stages": by_stage,
    });
    print!("{}", to_pretty(&value)?);
    Ok(0)
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<u8> {
    let counts: Vec<(TaskKind, usize)> = if args.kinds.is_empty() {
        standard_mix(args.count)
    } else {
        args.kinds
            .iter()
            .map(|k| TaskKind::from_key(k.trim()).map(|kind| (kind, args.count)).ok_or_else(|| anyhow!("unknown task kind `{k}`")))
            .collect::<anyhow::Result<_>>()?
    };
    if args.width < 16 {
        bail!("--width must be at least 16");
    }
    let tasks = generate_task_suite(args.seed, &counts, args.width, &flowplan::data::colocation_table());
    let manifest = Suite::write(&args.out, &tasks)?;
    println!("{} tasks -> {}", tasks.len(), manifest.display());
    Ok(0)
}
