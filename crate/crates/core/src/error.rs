use std::path::PathBuf;

use thiserror::Error;

use crate::constraints::ValidationReport;
use crate::llm::LlmError;
use crate::pipeline::PipelineTrace;
use crate::plan::ParseIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("unrecognized task label `{0}`")]
    UnrecognizedLabel(String),
    #[error("no well-formed plan lines ({} issues)", issues.len())]
    EmptyOutput { issues: Vec<ParseIssue> },
    #[error("reasoning response contains no numbered steps")]
    EmptyReasoning,
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate rule `{id}`")]
    DuplicateRule { line: usize, id: String },
    #[error("line {line}: unknown action `{name}`")]
    UnknownAction { line: usize, name: String },
    #[error("constraint config: {0}")]
    Config(String),

    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("no parseable response among {0} votes")]
    NoValidVotes(usize),
    #[error("task classification failed: {0}")]
    ClassificationFailed(Box<Error>),
    #[error("planning exhausted after {rounds} rounds")]
    PlanningExhausted {
        rounds: usize,
        report: Box<ValidationReport>,
        trace: Box<PipelineTrace>,
    },
    #[error("task info registry: {0}")]
    Registry(String),
    #[error("prompt template `{name}`: {message}")]
    Template { name: String, message: String },

    #[error("scene schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("goal ({x}, {y}) is unreachable")]
    Unreachable { x: usize, y: usize },
    #[error("step {step}: precondition failed: {reason}")]
    PreconditionFailed { step: usize, reason: String },
    #[error("step {step}: no `{label}` within reach")]
    TargetNotFound { step: usize, label: String },
    #[error("no episode results")]
    EmptyResults,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The LLM-level failure behind this error, if any.
    pub fn llm(&self) -> Option<&LlmError> {
        match self {
            Error::Llm(e) => Some(e),
            Error::ClassificationFailed(inner) => inner.llm(),
            _ => None,
        }
    }
}
