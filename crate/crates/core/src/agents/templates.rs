use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentError, ChatMessage, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Profiling,
    Task,
    Capability,
    Instruction,
    Observation,
    Context,
    ResponseFormat,
}

impl Slot {
    pub fn header(self) -> &'static str {
        match self {
            Slot::Profiling => "Profiling",
            Slot::Task => "Task",
            Slot::Capability => "Capability",
            Slot::Instruction => "Instruction",
            Slot::Observation => "Observation",
            Slot::Context => "Context",
            Slot::ResponseFormat => "Response Format",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header())
    }
}

const SYSTEM_ORDER: [Slot; 4] = [Slot::Profiling, Slot::Task, Slot::Capability, Slot::ResponseFormat];
const USER_ORDER: [Slot; 3] = [Slot::Instruction, Slot::Observation, Slot::Context];

/// One agent prompt. Profiling, task and response format are fixed text;
/// `slots` lists the components the caller has to supply at render time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub profiling: String,
    pub task: String,
    pub response_format: String,
    #[serde(default)]
    pub slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReflectionFile {
    reflection: String,
}

/// Prompts for every agent role plus the reflection block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplateSet {
    pub op: PromptTemplate,
    pub para: PromptTemplate,
    pub insp: PromptTemplate,
    pub sum: PromptTemplate,
    /// Combined prompt for the single-agent mode.
    pub single: PromptTemplate,
    pub relf: String,
}

const FILES: [&str; 6] = ["op.json", "para.json", "insp.json", "sum.json", "single.json", "relf.json"];

impl PromptTemplateSet {
    pub fn builtin() -> Self {
        Self::from_sources([
            include_str!("../../data/templates/op.json"),
            include_str!("../../data/templates/para.json"),
            include_str!("../../data/templates/insp.json"),
            include_str!("../../data/templates/sum.json"),
            include_str!("../../data/templates/single.json"),
            include_str!("../../data/templates/relf.json"),
        ])
        .expect("builtin templates are valid")
    }

    /// Loads `op.json`, `para.json`, `insp.json`, `sum.json`, `single.json`
    /// and `relf.json` from `dir`. Missing files fall back to the builtins.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, AgentError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(AgentError::Template(format!("{} is not a directory", dir.display())));
        }
        let builtin = Self::builtin();
        let mut set = builtin.clone();
        for name in FILES {
            let path = dir.join(name);
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| AgentError::Template(format!("{}: {e}", path.display())))?;
            let parse_err = |e: serde_json::Error| AgentError::Template(format!("{}: {e}", path.display()));
            if name == "relf.json" {
                set.relf = serde_json::from_str::<ReflectionFile>(&text).map_err(parse_err)?.reflection;
                continue;
            }
            let t: PromptTemplate = serde_json::from_str(&text).map_err(parse_err)?;
            match name {
                "op.json" => set.op = t,
                "para.json" => set.para = t,
                "insp.json" => set.insp = t,
                "sum.json" => set.sum = t,
                _ => set.single = t,
            }
        }
        Ok(set)
    }

    fn from_sources(src: [&str; 6]) -> Result<Self, AgentError> {
        let t = |s: &str| serde_json::from_str::<PromptTemplate>(s).map_err(|e| AgentError::Template(e.to_string()));
        Ok(Self {
            op: t(src[0])?,
            para: t(src[1])?,
            insp: t(src[2])?,
            sum: t(src[3])?,
            single: t(src[4])?,
            relf: serde_json::from_str::<ReflectionFile>(src[5])
                .map_err(|e| AgentError::Template(e.to_string()))?
                .reflection,
        })
    }
}

/// Renders `template` into a system and a user message.
///
/// Every slot the template lists must be present in `values`; a present but
/// empty value is omitted from the output. Values for slots the template does
/// not list are ignored.
pub fn assemble_prompt(
    template: &PromptTemplate,
    values: &BTreeMap<Slot, String>,
) -> Result<Vec<ChatMessage>, AgentError> {
    for slot in &template.slots {
        if !values.contains_key(slot) {
            return Err(AgentError::MissingSlot(*slot));
        }
    }
    let value = |slot: Slot| -> &str {
        match slot {
            Slot::Profiling => &template.profiling,
            Slot::Task => &template.task,
            Slot::ResponseFormat => &template.response_format,
            _ if template.slots.contains(&slot) => &values[&slot],
            _ => "",
        }
    };
    let render = |order: &[Slot]| {
        order
            .iter()
            .filter(|s| !value(**s).is_empty())
            .map(|s| format!("{}:\n{}", s.header(), value(*s)))
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    Ok(vec![
        ChatMessage { role: Role::System, content: render(&SYSTEM_ORDER) },
        ChatMessage { role: Role::User, content: render(&USER_ORDER) },
    ])
}
