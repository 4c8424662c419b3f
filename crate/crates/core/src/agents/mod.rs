//! Prompt assembly, model backends, response parsing and the agent roles:
//! operation, parameter selection, inspection and memory summarization.

mod backend;
mod response;
mod templates;

pub use backend::{
    load_transcript, BackendError, CompletionRequest, HttpBackend, LlmBackend, RecordingBackend, ScriptedBackend,
    TranscriptEntry, TranscriptKey, API_KEY_ENV, API_URL_ENV,
};
pub use response::{parse_agent_response, AgentAnswer, AnswerPayload};
pub use templates::{assemble_prompt, PromptTemplate, PromptTemplateSet, Slot};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{ParameterList, SkillCall};
use crate::environment::ExecutionStatus;
use crate::perception::GuiState;
use crate::rewriting::placeholders;
use crate::skills::{render_skill_prompt, InvalidReason, SkillLibrary};

pub const DEFAULT_MEMORY_BUDGET: usize = 500;
const ELLIPSIS: char = '…';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Op,
    Para,
    Insp,
    Sum,
    /// The combined agent of the single-agent mode.
    Single,
}

impl AgentKind {
    /// Agent name used in transcript keys. The single agent answers in the
    /// operation agent's slots.
    pub fn transcript_name(self) -> &'static str {
        match self {
            AgentKind::Op | AgentKind::Single => "op",
            AgentKind::Para => "para",
            AgentKind::Insp => "insp",
            AgentKind::Sum => "sum",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("template does not receive slot {0}")]
    MissingSlot(Slot),
    #[error("bad template: {0}")]
    Template(String),
    #[error("unparseable response: {0}")]
    Unparseable(String),
    #[error("response does not match the schema: {0}")]
    SchemaMismatch(String),
    #[error("parameter {0:?} is not in the parameter list")]
    UnknownParameter(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl AgentError {
    pub fn code(&self) -> &'static str {
        match self {
            AgentError::MissingSlot(_) => "MISSING_SLOT",
            AgentError::Template(_) => "TEMPLATE_ERROR",
            AgentError::Unparseable(_) => "UNPARSEABLE",
            AgentError::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            AgentError::UnknownParameter(_) => "UNKNOWN_PARAMETER",
            AgentError::Backend(_) => "BACKEND_ERROR",
        }
    }

    /// Errors caused by the content of a model answer. They go through the
    /// reflection loop instead of aborting.
    pub fn is_answer_error(&self) -> bool {
        matches!(
            self,
            AgentError::Unparseable(_) | AgentError::SchemaMismatch(_) | AgentError::UnknownParameter(_)
        )
    }
}

/// Why a proposed action could not be used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Invalidity {
    Static(InvalidReason),
    Rejected(String),
    Answer(AgentError),
}

impl Invalidity {
    pub fn code(&self) -> &'static str {
        match self {
            Invalidity::Static(r) => r.code(),
            Invalidity::Rejected(_) => "REJECTED",
            Invalidity::Answer(e) => e.code(),
        }
    }

    pub fn detail(&self) -> String {
        match self {
            Invalidity::Static(r) => {
                let full = r.to_string();
                full.split_once(": ").map_or(full.clone(), |(_, d)| d.to_string())
            }
            Invalidity::Rejected(r) => r.clone(),
            Invalidity::Answer(e) => e.to_string(),
        }
    }
}

/// One entry of the invalid history H.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidAttempt {
    /// Index of the action iteration within its step, from 0.
    pub action_index: usize,
    /// The offending call, absent when the answer could not be parsed.
    pub call: Option<SkillCall>,
    pub code: String,
    pub detail: String,
}

impl InvalidAttempt {
    pub fn new(action_index: usize, call: Option<SkillCall>, why: &Invalidity) -> Self {
        Self { action_index, call, code: why.code().to_string(), detail: why.detail() }
    }
}

impl fmt::Display for InvalidAttempt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.call {
            Some(c) => write!(f, "{c} -> {}: {}", self.code, self.detail),
            None => write!(f, "(no usable call) -> {}: {}", self.code, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub call: SkillCall,
    pub status: ExecutionStatus,
}

impl fmt::Display for MemoryEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            ExecutionStatus::Applied => "APPLIED",
            ExecutionStatus::Rejected => "REJECTED",
        };
        write!(f, "{} -> {status}", self.call)
    }
}

/// Working memory of the operation agent within one step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memory {
    pub summary: String,
    pub recent_actions: Vec<MemoryEntry>,
}

/// Cuts `text` to at most `budget` characters, marking the cut with `…`.
pub fn truncate_to_budget(text: &str, budget: usize) -> String {
    if text.chars().count() <= budget {
        return text.to_string();
    }
    if budget == 0 {
        return String::new();
    }
    let mut out: String = text.chars().take(budget - 1).collect();
    out.push(ELLIPSIS);
    out
}

fn numbered<T: fmt::Display>(items: &[T]) -> String {
    items.iter().enumerate().map(|(i, x)| format!("{}. {x}", i + 1)).collect::<Vec<_>>().join("\n")
}

fn render_parameters(params: &ParameterList) -> String {
    params.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n")
}

/// Answer of the combined agent in single-agent mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleAnswer {
    pub call: SkillCall,
    pub parameter: Option<String>,
    pub goal: bool,
    pub summary: Option<String>,
}

/// Agent state of one case session: backend, prompts and attempt counters.
pub struct AgentSession<'a> {
    backend: &'a dyn LlmBackend,
    templates: &'a PromptTemplateSet,
    library: &'a SkillLibrary,
    params: &'a ParameterList,
    case_id: String,
    skill_prompt: String,
    memory_budget: usize,
    reflection: bool,
    attempts: HashMap<(usize, &'static str), usize>,
    warnings: Vec<String>,
}

impl<'a> AgentSession<'a> {
    pub fn new(
        case_id: impl Into<String>,
        backend: &'a dyn LlmBackend,
        templates: &'a PromptTemplateSet,
        library: &'a SkillLibrary,
        params: &'a ParameterList,
    ) -> Self {
        Self {
            backend,
            templates,
            library,
            params,
            case_id: case_id.into(),
            skill_prompt: render_skill_prompt(library),
            memory_budget: DEFAULT_MEMORY_BUDGET,
            reflection: true,
            attempts: HashMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_memory_budget(mut self, chars: usize) -> Self {
        self.memory_budget = chars;
        self
    }

    /// Drops the reflection block from re-proposal prompts. The invalid
    /// actions themselves are still shown.
    pub fn with_reflection(mut self, enabled: bool) -> Self {
        self.reflection = enabled;
        self
    }

    pub fn library(&self) -> &SkillLibrary {
        self.library
    }

    pub fn params(&self) -> &ParameterList {
        self.params
    }

    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    fn ask(
        &mut self,
        step: usize,
        kind: AgentKind,
        values: BTreeMap<Slot, String>,
    ) -> Result<AgentAnswer, AgentError> {
        let template = match kind {
            AgentKind::Op => &self.templates.op,
            AgentKind::Para => &self.templates.para,
            AgentKind::Insp => &self.templates.insp,
            AgentKind::Sum => &self.templates.sum,
            AgentKind::Single => &self.templates.single,
        };
        let messages = assemble_prompt(template, &values)?;
        let agent = kind.transcript_name();
        let counter = self.attempts.entry((step, agent)).or_insert(0);
        let key = TranscriptKey { case: self.case_id.clone(), step, agent: agent.to_string(), attempt: *counter };
        *counter += 1;
        let raw = self.backend.complete(&CompletionRequest { key, messages })?;
        parse_agent_response(&raw, kind)
    }

    fn op_context(&self, instruction: &str, memory: &Memory, invalid: &[InvalidAttempt]) -> String {
        let summary = if memory.summary.is_empty() { "None" } else { &memory.summary };
        let mut sections = vec![format!("Working Memory:\n{summary}")];
        if !memory.recent_actions.is_empty() {
            sections.push(format!("Executed Actions:\n{}", numbered(&memory.recent_actions)));
        }
        let referenced: Vec<String> = placeholders(instruction)
            .into_iter()
            .filter_map(|name| self.params.get(&name).map(|v| format!("{name}: {v}")))
            .collect();
        if !referenced.is_empty() {
            sections.push(format!("Referenced Parameters:\n{}", referenced.join("\n")));
        }
        if !invalid.is_empty() {
            sections.push(format!("Invalid Actions:\n{}", numbered(invalid)));
            if self.reflection {
                sections.push(format!("Reflection:\n{}", self.templates.relf));
            }
        }
        sections.join("\n\n")
    }

    /// Asks the operation agent for the next call. A non-empty `invalid`
    /// history switches to the reflection prompt.
    pub fn operation_propose(
        &mut self,
        step: usize,
        instruction: &str,
        state: &GuiState,
        memory: &Memory,
        invalid: &[InvalidAttempt],
    ) -> Result<SkillCall, AgentError> {
        let values = BTreeMap::from([
            (Slot::Capability, self.skill_prompt.clone()),
            (Slot::Instruction, instruction.to_string()),
            (Slot::Observation, state.serialized().to_string()),
            (Slot::Context, self.op_context(instruction, memory, invalid)),
        ]);
        match self.ask(step, AgentKind::Op, values)?.payload {
            AnswerPayload::Operation { command, args, description } => {
                Ok(SkillCall { skill_name: command, args, rationale: description })
            }
            _ => unreachable!("operation answers carry an operation payload"),
        }
    }

    /// Picks the parameter for an input call. Returns a name from the list.
    pub fn parameter_select(&mut self, step: usize, instruction: &str, call: &SkillCall) -> Result<String, AgentError> {
        let skill = match self.library.get(&call.skill_name) {
            Some(spec) => format!("Inferred skill: {call}\nSkill description: {}", spec.description),
            None => format!("Inferred skill: {call}"),
        };
        let values = BTreeMap::from([
            (Slot::Capability, render_parameters(self.params)),
            (Slot::Instruction, instruction.to_string()),
            (Slot::Observation, String::new()),
            (Slot::Context, skill),
        ]);
        match self.ask(step, AgentKind::Para, values)?.payload {
            AnswerPayload::Parameter(name) if self.params.contains(&name) => Ok(name),
            AnswerPayload::Parameter(name) => Err(AgentError::UnknownParameter(name)),
            _ => unreachable!("parameter answers carry a name"),
        }
    }

    /// Judges whether the current step is done. `next_instruction` is `None`
    /// at the last step; there a terminal page answers yes without a call.
    /// An unusable answer is retried once and then counts as no.
    pub fn inspect_goal(
        &mut self,
        step: usize,
        actions: &[SkillCall],
        current_instruction: &str,
        next_instruction: Option<&str>,
        state: &GuiState,
        terminal: Option<bool>,
    ) -> Result<bool, AgentError> {
        let instruction = match next_instruction {
            Some(next) => next.to_string(),
            None if terminal == Some(true) => return Ok(true),
            None => format!("This was the final step. Check whether its goal is achieved: {current_instruction}"),
        };
        let values = BTreeMap::from([
            (Slot::Instruction, instruction),
            (Slot::Observation, state.serialized().to_string()),
            (Slot::Context, format!("Actions performed for this step:\n{}", numbered(actions))),
        ]);
        let mut last_err = None;
        for _ in 0..2 {
            match self.ask(step, AgentKind::Insp, values.clone()) {
                Ok(AgentAnswer { payload: AnswerPayload::Goal(g), .. }) => return Ok(g),
                Ok(_) => unreachable!("inspection answers carry a goal"),
                Err(e) if e.is_answer_error() => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        let msg = format!("step {step}: inspection answer unusable twice, treated as no ({})", last_err.expect("set"));
        log::warn!("{msg}");
        self.warnings.push(msg);
        Ok(false)
    }

    /// Folds the last action into the working memory. On any failure the
    /// previous memory is returned unchanged and a warning is recorded.
    pub fn summarize_memory(
        &mut self,
        step: usize,
        instruction: &str,
        memory: &Memory,
        last_action: MemoryEntry,
        state: &GuiState,
        goal: bool,
    ) -> Result<Memory, AgentError> {
        let previous = if memory.summary.is_empty() { "None" } else { &memory.summary };
        let context = format!(
            "Previous Memory:\n{previous}\n\nLast Action:\n{last_action}\n\nStep Goal Accomplished:\n{}",
            if goal { "yes" } else { "no" }
        );
        let values = BTreeMap::from([
            (Slot::Instruction, instruction.to_string()),
            (Slot::Observation, state.serialized().to_string()),
            (Slot::Context, context),
        ]);
        match self.ask(step, AgentKind::Sum, values) {
            Ok(AgentAnswer { payload: AnswerPayload::Summary(s), .. }) => {
                let mut recent_actions = memory.recent_actions.clone();
                recent_actions.push(last_action);
                Ok(Memory { summary: truncate_to_budget(&s, self.memory_budget), recent_actions })
            }
            Ok(_) => unreachable!("summary answers carry a summary"),
            Err(e @ (AgentError::MissingSlot(_) | AgentError::Template(_))) => Err(e),
            Err(e) => {
                let msg = format!("step {step}: memory not updated ({e})");
                log::warn!("{msg}");
                self.warnings.push(msg);
                Ok(memory.clone())
            }
        }
    }

    /// One combined call of the single-agent mode.
    #[allow(clippy::too_many_arguments)]
    pub fn single_propose(
        &mut self,
        step: usize,
        instruction: &str,
        next_instruction: Option<&str>,
        state: &GuiState,
        memory: &Memory,
        invalid: &[InvalidAttempt],
    ) -> Result<SingleAnswer, AgentError> {
        let capability = format!("{}\n\nParameters:\n{}", self.skill_prompt, render_parameters(self.params));
        let next = next_instruction.unwrap_or("None, this is the final step.");
        let context = format!("{}\n\nNext Step:\n{next}", self.op_context(instruction, memory, invalid));
        let values = BTreeMap::from([
            (Slot::Capability, capability),
            (Slot::Instruction, instruction.to_string()),
            (Slot::Observation, state.serialized().to_string()),
            (Slot::Context, context),
        ]);
        match self.ask(step, AgentKind::Single, values)?.payload {
            AnswerPayload::Combined { command, args, description, parameter, goal, summary } => {
                if let Some(p) = &parameter {
                    if !self.params.contains(p) {
                        return Err(AgentError::UnknownParameter(p.clone()));
                    }
                }
                Ok(SingleAnswer {
                    call: SkillCall { skill_name: command, args, rationale: description },
                    parameter,
                    goal,
                    summary: summary.map(|s| truncate_to_budget(&s, self.memory_budget)),
                })
            }
            _ => unreachable!("single answers carry a combined payload"),
        }
    }
}
