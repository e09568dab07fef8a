//! Multi-stage LLM task planning for embodied instruction following.
//!
//! The crate is organised by pipeline role:
//!
//! - [`plan`]: plan vocabulary, task types and the plan text formats.
//! - [`constraints`]: operational-constraint configs, plan validation and
//!   lexical correction.
//! - [`llm`]: completion providers (live, record, replay, scripted) and voting.
//! - [`pipeline`]: the cascaded planner (classification, reasoning, symbolic
//!   planning, evaluation with correction and re-planning).
//! - [`localization`]: co-location and context probability maps and goal
//!   selection over a semantic map.
//! - [`sim`]: a gridworld with household-object semantics, episode runner and
//!   benchmark metrics.
//! - [`synth`]: a deterministic stand-in LLM used to author cassettes.

use std::path::Path;

pub mod constraints;
pub mod data;
pub mod error;
pub mod harness;
pub mod llm;
pub mod localization;
pub mod pipeline;
pub mod plan;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
