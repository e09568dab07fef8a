//! Configuration files shipped with the crate.
//!
//! Each accessor parses the embedded copy of a file under `data/`; the same
//! files can be loaded from disk with the regular `load` constructors.

use crate::constraints::{parse_constraint_config, ConstraintConfig, ProfileRegistry};
use crate::localization::ColocationTable;
use crate::pipeline::{PromptSet, TaskInfoRegistry};
use crate::plan::Vocabulary;

pub const ALFRED_RULES: &str = include_str!("../data/alfred.rules");
pub const REALWORLD_RULES: &str = include_str!("../data/realworld.rules");
pub const ALFRED_VOCABULARY: &str = include_str!("../data/vocab_alfred.json");
pub const REALWORLD_VOCABULARY: &str = include_str!("../data/vocab_realworld.json");
pub const ALFRED_TASK_INFO: &str = include_str!("../data/task_info_alfred.json");
pub const REALWORLD_TASK_INFO: &str = include_str!("../data/task_info_realworld.json");
pub const COLOCATION_TABLE: &str = include_str!("../data/colocation.json");

pub const PROMPT_CLASSIFY: &str = include_str!("../data/prompts/classify.txt");
pub const PROMPT_REASON: &str = include_str!("../data/prompts/reason.txt");
pub const PROMPT_SYMBOLIC: &str = include_str!("../data/prompts/symbolic.txt");
pub const PROMPT_CORRECT: &str = include_str!("../data/prompts/correct.txt");
pub const PROMPT_COLOCATE: &str = include_str!("../data/prompts/colocate.txt");
pub const PROMPT_ALIGN: &str = include_str!("../data/prompts/align.txt");

pub fn alfred_rules() -> ConstraintConfig {
    parse_constraint_config(ALFRED_RULES).expect("bundled alfred.rules parses")
}

pub fn realworld_rules() -> ConstraintConfig {
    parse_constraint_config(REALWORLD_RULES).expect("bundled realworld.rules parses")
}

pub fn profiles() -> ProfileRegistry {
    ProfileRegistry::new([alfred_rules(), realworld_rules()])
}

pub fn alfred_vocabulary() -> Vocabulary {
    Vocabulary::from_json(ALFRED_VOCABULARY).expect("bundled alfred vocabulary parses")
}

pub fn realworld_vocabulary() -> Vocabulary {
    Vocabulary::from_json(REALWORLD_VOCABULARY).expect("bundled realworld vocabulary parses")
}

pub fn alfred_task_info() -> TaskInfoRegistry {
    TaskInfoRegistry::from_json(ALFRED_TASK_INFO).expect("bundled alfred task info parses")
}

pub fn realworld_task_info() -> TaskInfoRegistry {
    TaskInfoRegistry::from_json(REALWORLD_TASK_INFO).expect("bundled realworld task info parses")
}

pub fn colocation_table() -> ColocationTable {
    ColocationTable::from_json(COLOCATION_TABLE).expect("bundled co-location table parses")
}

pub fn prompts() -> PromptSet {
    PromptSet::from_texts(
        PROMPT_CLASSIFY,
        PROMPT_REASON,
        PROMPT_SYMBOLIC,
        PROMPT_CORRECT,
        PROMPT_COLOCATE,
        PROMPT_ALIGN,
    )
}

/// Everything needed to plan for one embodiment.
#[derive(Debug, Clone)]
pub struct Domain {
    pub name: String,
    pub vocabulary: Vocabulary,
    pub task_info: TaskInfoRegistry,
    pub profiles: ProfileRegistry,
}

impl Domain {
    pub fn alfred() -> Self {
        Self {
            name: "alfred".into(),
            vocabulary: alfred_vocabulary(),
            task_info: alfred_task_info(),
            profiles: profiles(),
        }
    }

    pub fn realworld() -> Self {
        Self {
            name: "realworld".into(),
            vocabulary: realworld_vocabulary(),
            task_info: realworld_task_info(),
            profiles: profiles(),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "alfred" => Some(Self::alfred()),
            "realworld" => Some(Self::realworld()),
            _ => None,
        }
    }
}
